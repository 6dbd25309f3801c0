"""Face parameter vocabularies, selection validation, and prompt compilation.

The user never types free text: a selection is a map of field name to one
value out of a closed vocabulary, and the prompt is compiled from a fixed
sentence template. Extending a vocabulary is a data change here, not a code
change anywhere else; the CLI, the HTTP API, and the web UI all read the
schema exported by this module.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Mapping, Optional

from .errors import FaceMatchError

#: Closed vocabularies, keyed by field name, in canonical field order.
VOCABULARIES: dict[str, tuple[str, ...]] = {
    "gender": ("Male", "Female"),
    "age_group": ("young adult", "adult", "middle-aged", "elderly"),
    "skin_tone": ("fair", "olive", "brown", "dark"),
    "eye_shape": ("round", "almond-shaped", "hooded", "monolid", "upturned", "downturned"),
    "eye_color": ("black", "brown", "hazel", "green", "blue", "grey"),
    "eyebrow_shape": ("thick", "thin", "straight", "arched"),
    "nose_shape": ("button", "straight", "pointed", "aquiline", "wide"),
    "lip_shape": ("full", "thin", "heart-shaped", "wide"),
    "face_shape": ("oval", "round", "square", "heart", "oblong"),
    "jawline_shape": ("square", "rounded", "sharp", "soft"),
    "chin_shape": ("pointed", "rounded", "square", "cleft"),
    "beard": ("full", "stubble", "goatee", "trimmed"),
    "moustache": ("full", "thin", "handlebar"),
}

#: Fields that may be omitted; only meaningful for Male selections.
OPTIONAL_FIELDS: tuple[str, ...] = ("beard", "moustache")

REQUIRED_FIELDS: tuple[str, ...] = tuple(
    name for name in VOCABULARIES if name not in OPTIONAL_FIELDS
)

#: Canonical serialization order, required then optional.
FIELD_ORDER: tuple[str, ...] = tuple(VOCABULARIES)


@dataclass(frozen=True)
class ParameterIssue:
    """One validation problem; a single raise may carry several."""

    kind: str  # unknown_field | missing_field | invalid_value | inconsistent_selection
    field: str
    value: Optional[str]
    message: str


class ParameterError(FaceMatchError, ValueError):
    """Raised by validate_parameters; carries every detected issue."""

    code = "invalid_parameters"

    def __init__(self, issues: list[ParameterIssue]):
        self.issues = issues
        super().__init__("; ".join(issue.message for issue in issues))


class UnknownField(ParameterError):
    code = "unknown_field"


class InvalidValue(ParameterError):
    code = "invalid_value"


class InconsistentSelection(ParameterError):
    code = "inconsistent_selection"


@dataclass(frozen=True)
class FaceParameters:
    """A validated selection. Construct through validate_parameters."""

    gender: str
    age_group: str
    skin_tone: str
    eye_shape: str
    eye_color: str
    eyebrow_shape: str
    nose_shape: str
    lip_shape: str
    face_shape: str
    jawline_shape: str
    chin_shape: str
    beard: Optional[str] = None
    moustache: Optional[str] = None

    def to_dict(self) -> dict[str, str]:
        """Flat field-name to value map, canonical order, optionals omitted."""
        out: dict[str, str] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if value is not None:
                out[f.name] = value
        return out


def _issue_class(issues: list[ParameterIssue]) -> type[ParameterError]:
    kinds = {issue.kind for issue in issues}
    if kinds == {"unknown_field"}:
        return UnknownField
    if kinds == {"inconsistent_selection"}:
        return InconsistentSelection
    if kinds <= {"invalid_value", "missing_field"}:
        return InvalidValue
    return ParameterError


def validate_parameters(raw: Mapping[str, str]) -> FaceParameters:
    """Validate a raw field-name to string map into FaceParameters.

    Collects every problem before raising so a caller (or end user) sees
    the complete list: unknown keys, missing required fields, values
    outside their vocabulary, and beard/moustache on a Female selection.
    """
    issues: list[ParameterIssue] = []

    for key in raw:
        if key not in VOCABULARIES:
            issues.append(
                ParameterIssue(
                    "unknown_field", key, None, f"unknown field {key!r}"
                )
            )

    values: dict[str, Optional[str]] = {}
    for name in FIELD_ORDER:
        allowed = VOCABULARIES[name]
        value = raw.get(name)
        if value is not None and not isinstance(value, str):
            issues.append(
                ParameterIssue(
                    "invalid_value",
                    name,
                    None,
                    f"{name} must be a string, got {type(value).__name__}",
                )
            )
            continue
        if value is None or value == "":
            if name in OPTIONAL_FIELDS:
                values[name] = None
            else:
                issues.append(
                    ParameterIssue(
                        "missing_field",
                        name,
                        None,
                        f"missing required field {name!r}; allowed: {', '.join(allowed)}",
                    )
                )
            continue
        if value not in allowed:
            issues.append(
                ParameterIssue(
                    "invalid_value",
                    name,
                    value,
                    f"invalid value {value!r} for {name}; allowed: {', '.join(allowed)}",
                )
            )
            continue
        values[name] = value

    if values.get("gender") == "Female":
        for name in OPTIONAL_FIELDS:
            if values.get(name) is not None:
                issues.append(
                    ParameterIssue(
                        "inconsistent_selection",
                        name,
                        values[name],
                        f"{name} may only be set when gender is Male",
                    )
                )

    if issues:
        raise _issue_class(issues)(issues)

    return FaceParameters(**{k: v for k, v in values.items()})  # type: ignore[arg-type]


def _article(phrase: str) -> str:
    # indefinite article by leading vowel: "an adult", "a young adult"
    return "an" if phrase[:1].lower() in "aeiou" else "a"


def build_prompt(p: FaceParameters) -> str:
    """Compile the canonical text prompt for a validated selection.

    Deterministic: equal parameters yield byte-identical text.
    """
    prompt = (
        f"a face of {_article(p.age_group)} {p.age_group} {p.gender} "
        f"with {p.skin_tone} skin tone, "
        f"{p.eye_shape} eye shape with {p.eye_color} eyes, "
        f"{p.nose_shape} nose, and {p.lip_shape} lips, "
        f"{p.eyebrow_shape} eyebrows, {p.face_shape} face shape, "
        f"{p.jawline_shape} jawline, {p.chin_shape} chin"
    )
    if p.beard is not None:
        prompt += f", and a {p.beard} beard"
    if p.moustache is not None:
        prompt += f", and a {p.moustache} moustache"
    return prompt


def format_params_file(p: FaceParameters) -> str:
    """Render a selection as the flat key-value document the CLI reads."""
    lines = [f"{name} = {value}" for name, value in p.to_dict().items()]
    return "\n".join(lines) + "\n"


def parse_params_file(text: str) -> dict[str, str]:
    """Parse the flat key-value document into a raw map.

    One "key = value" pair per line; blank lines and '#' comments are
    ignored. Returns the raw map; pass it to validate_parameters.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ParameterError(
                [
                    ParameterIssue(
                        "invalid_value",
                        "",
                        stripped,
                        f"line {lineno}: expected 'key = value', got {stripped!r}",
                    )
                ]
            )
        key, _, value = stripped.partition("=")
        raw[key.strip()] = value.strip()
    return raw


def field_schema() -> list[dict[str, object]]:
    """Schema document served to UIs: one entry per field, canonical order."""
    return [
        {
            "name": name,
            "values": list(VOCABULARIES[name]),
            "required": name not in OPTIONAL_FIELDS,
            "male_only": name in OPTIONAL_FIELDS,
        }
        for name in FIELD_ORDER
    ]
