"""Shared exception base for the facematch package.

Concrete errors live next to the code that raises them; everything
inherits from FaceMatchError so callers can catch the whole family.
"""


class FaceMatchError(Exception):
    """Base class for all errors raised by this package."""

    #: machine-readable identifier, stable across releases
    code = "facematch_error"
