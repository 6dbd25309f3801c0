"""Parameter-driven face matching engine.

Compiles user-selected face parameters into a canonical text prompt,
obtains a generated face image, embeds faces into 512-d unit vectors,
and retrieves the most similar faces from an embedded vector index.
"""

__version__ = "0.1.0"

from .errors import FaceMatchError

__all__ = ["FaceMatchError", "__version__"]
