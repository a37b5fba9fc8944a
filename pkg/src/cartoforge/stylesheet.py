"""Stylesheet IR, layer manifest, review verdicts, and their JSON (de)serialization.

The interchange format is a single JSON document::

    {"reasoning": ..., "stylesheet": {
        "symbol (icon)":  {"<element>": {"explanation": ..., "expectation": ...}},
        "symbol (label)": {"<element>": {"explanation": ..., "text-color": ..., "text-halo-color": ...}},
        "line":           {"<element>": {"explanation": ..., "line-opacity": ..., "line-color": ...}},
        "fill":           {"<element>": {"explanation": ..., "fill-opacity": ..., "fill-color": ...,
                                         "fill-outline-color": ...}},
        "background":     {"explanation": ..., "background-color": ...}}}

Element order inside each category is significant: it drives layer z-order
downstream, so parsing preserves JSON object key order and equality is
order-sensitive.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, field, replace

from .errors import (
    IllegalVariableForCategory,
    MalformedJson,
    MissingBackground,
    SchemaViolation,
    UnknownElement,
)

CATEGORY_ICON = "icon"
CATEGORY_LABEL = "label"
CATEGORY_LINE = "line"
CATEGORY_FILL = "fill"
CATEGORY_BACKGROUND = "background"

CATEGORIES = (CATEGORY_ICON, CATEGORY_LABEL, CATEGORY_LINE, CATEGORY_FILL, CATEGORY_BACKGROUND)

# JSON keys of the stylesheet document, in emission order.
_CATEGORY_KEYS = {
    CATEGORY_ICON: "symbol (icon)",
    CATEGORY_LABEL: "symbol (label)",
    CATEGORY_LINE: "line",
    CATEGORY_FILL: "fill",
    CATEGORY_BACKGROUND: "background",
}
_KEY_CATEGORIES = {v: k for k, v in _CATEGORY_KEYS.items()}

# Adjustable variables per category (hyphenated interchange names).
CATEGORY_VARIABLES = {
    CATEGORY_ICON: ("expectation",),
    CATEGORY_LABEL: ("text-color", "text-halo-color"),
    CATEGORY_LINE: ("line-opacity", "line-color"),
    CATEGORY_FILL: ("fill-opacity", "fill-color", "fill-outline-color"),
    CATEGORY_BACKGROUND: ("background-color",),
}

_HEX6 = re.compile(r"^#[0-9a-f]{6}$")
_HEX3 = re.compile(r"^#[0-9a-fA-F]{3}$")


class StyleWarning(UserWarning):
    """Non-fatal stylesheet irregularity (tolerant parse mode)."""


def normalize_color(value: object) -> str:
    """Canonicalize a hex color to lowercase ``#rrggbb``.

    Accepts mixed case and 3-digit shorthand (``#abc`` expands to ``#aabbcc``).
    """
    if not isinstance(value, str):
        raise SchemaViolation(f"color must be a string, got {value!r}")
    s = value.strip()
    if _HEX3.match(s):
        s = "#" + "".join(ch * 2 for ch in s[1:])
    s = s.lower()
    if not _HEX6.match(s):
        raise SchemaViolation(f"not a valid hex color: {value!r}")
    return s


def validate_opacity(value: object) -> float:
    """Check an opacity is a number in [0, 1] and return it as float."""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaViolation(f"opacity must be a number, got {value!r}")
    v = float(value)
    if not 0.0 <= v <= 1.0:
        raise SchemaViolation(f"opacity {v} outside [0, 1]")
    return v


def slugify(name: str) -> str:
    """Lowercase an element name and replace whitespace runs with hyphens."""
    return re.sub(r"\s+", "-", name.strip().lower())


@dataclass(frozen=True)
class IconSpec:
    """Textual description handed to the icon designer."""

    explanation: str
    expectation: str

    def __post_init__(self):
        if not self.expectation:
            raise SchemaViolation("icon expectation must be non-empty")


@dataclass(frozen=True)
class LabelStyle:
    explanation: str
    text_color: str
    text_halo_color: str

    def __post_init__(self):
        object.__setattr__(self, "text_color", normalize_color(self.text_color))
        object.__setattr__(self, "text_halo_color", normalize_color(self.text_halo_color))


@dataclass(frozen=True)
class LineStyle:
    explanation: str
    line_opacity: float
    line_color: str

    def __post_init__(self):
        object.__setattr__(self, "line_opacity", validate_opacity(self.line_opacity))
        object.__setattr__(self, "line_color", normalize_color(self.line_color))


@dataclass(frozen=True)
class FillStyle:
    explanation: str
    fill_opacity: float
    fill_color: str
    fill_outline_color: str

    def __post_init__(self):
        object.__setattr__(self, "fill_opacity", validate_opacity(self.fill_opacity))
        object.__setattr__(self, "fill_color", normalize_color(self.fill_color))
        object.__setattr__(self, "fill_outline_color", normalize_color(self.fill_outline_color))


@dataclass(frozen=True)
class BackgroundStyle:
    explanation: str
    background_color: str

    def __post_init__(self):
        object.__setattr__(self, "background_color", normalize_color(self.background_color))


@dataclass(eq=False)
class StyleSheet:
    """Abstract style document: per-element visual variables plus rationale."""

    reasoning: str
    icons: dict[str, IconSpec] = field(default_factory=dict)
    labels: dict[str, LabelStyle] = field(default_factory=dict)
    lines: dict[str, LineStyle] = field(default_factory=dict)
    fills: dict[str, FillStyle] = field(default_factory=dict)
    background: BackgroundStyle = BackgroundStyle("", "#ffffff")

    def category(self, name: str) -> dict:
        return {
            CATEGORY_ICON: self.icons,
            CATEGORY_LABEL: self.labels,
            CATEGORY_LINE: self.lines,
            CATEGORY_FILL: self.fills,
        }[name]

    def __eq__(self, other: object) -> bool:
        # Order-sensitive: two sheets with the same entries in different
        # order are different documents.
        if not isinstance(other, StyleSheet):
            return NotImplemented
        return (
            self.reasoning == other.reasoning
            and list(self.icons.items()) == list(other.icons.items())
            and list(self.labels.items()) == list(other.labels.items())
            and list(self.lines.items()) == list(other.lines.items())
            and list(self.fills.items()) == list(other.fills.items())
            and self.background == other.background
        )

    __hash__ = None


@dataclass(frozen=True)
class LayerManifest:
    """Inventory of named map elements per category at one map scale."""

    icon_elements: tuple[str, ...] = ()
    label_elements: tuple[str, ...] = ()
    line_elements: tuple[str, ...] = ()
    fill_elements: tuple[str, ...] = ()
    has_background: bool = True

    def __post_init__(self):
        for cat in (CATEGORY_ICON, CATEGORY_LABEL, CATEGORY_LINE, CATEGORY_FILL):
            names = self.elements(cat)
            if len(set(names)) != len(names):
                raise SchemaViolation(f"duplicate {cat} element names in manifest")
        if not (self.icon_elements or self.label_elements or self.line_elements or self.fill_elements):
            raise SchemaViolation("manifest has no elements")

    def elements(self, category: str) -> tuple[str, ...]:
        return {
            CATEGORY_ICON: self.icon_elements,
            CATEGORY_LABEL: self.label_elements,
            CATEGORY_LINE: self.line_elements,
            CATEGORY_FILL: self.fill_elements,
        }[category]

    @classmethod
    def from_json(cls, text: str) -> "LayerManifest":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise MalformedJson(f"manifest: {e}") from e
        if not isinstance(doc, dict):
            raise SchemaViolation("manifest must be a JSON object")
        unknown = set(doc) - {"icon", "label", "line", "fill"}
        if unknown:
            raise SchemaViolation(f"unknown manifest keys: {sorted(unknown)}")

        def names(key: str) -> tuple[str, ...]:
            items = doc.get(key, [])
            if not isinstance(items, list) or not all(isinstance(n, str) for n in items):
                raise SchemaViolation(f"manifest {key!r} must be a list of names")
            return tuple(items)

        return cls(names("icon"), names("label"), names("line"), names("fill"))

    def to_json(self) -> str:
        return json.dumps(
            {
                "icon": list(self.icon_elements),
                "label": list(self.label_elements),
                "line": list(self.line_elements),
                "fill": list(self.fill_elements),
            },
            indent=2,
            ensure_ascii=False,
        )


@dataclass(frozen=True)
class ReviewSuggestion:
    """One actionable change: element, category, and the variables to replace."""

    element: str
    category: str
    changes: tuple[tuple[str, object], ...]
    explanation: str = ""

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise SchemaViolation(f"unknown category {self.category!r}")
        if isinstance(self.changes, dict):
            object.__setattr__(self, "changes", tuple(self.changes.items()))
        if not self.changes:
            raise SchemaViolation("suggestion carries no changes")
        legal = CATEGORY_VARIABLES[self.category]
        normalized = []
        for name, value in self.changes:
            if name not in legal:
                raise IllegalVariableForCategory(
                    f"{name!r} is not adjustable for category {self.category!r}"
                )
            if name.endswith("color"):
                value = normalize_color(value)
            elif name.endswith("opacity"):
                value = validate_opacity(value)
            elif not isinstance(value, str) or not value:
                raise SchemaViolation(f"{name} must be non-empty text")
            normalized.append((name, value))
        object.__setattr__(self, "changes", tuple(normalized))

    @property
    def changes_dict(self) -> dict[str, object]:
        return dict(self.changes)


ACCEPT = "Accept"
REVISE = "Revise"


@dataclass(frozen=True)
class ReviewVerdict:
    decision: str
    suggestions: tuple[ReviewSuggestion, ...] = ()
    commentary: str = ""

    def __post_init__(self):
        if self.decision not in (ACCEPT, REVISE):
            raise SchemaViolation(f"decision must be Accept or Revise, got {self.decision!r}")
        object.__setattr__(self, "suggestions", tuple(self.suggestions))
        if self.decision == ACCEPT and self.suggestions:
            raise SchemaViolation("Accept verdict must carry no suggestions")
        if self.decision == REVISE and not self.suggestions:
            raise SchemaViolation("Revise verdict requires at least one suggestion")

    @property
    def is_accept(self) -> bool:
        return self.decision == ACCEPT


@dataclass(frozen=True)
class CompletenessReport:
    """Diagnostics from matching a sheet against a manifest."""

    missing: tuple[tuple[str, str], ...]      # (category, element) in manifest, unstyled
    extraneous: tuple[tuple[str, str], ...]   # (category, element) styled, not in manifest

    @property
    def is_complete(self) -> bool:
        return not self.missing and not self.extraneous


# --- parsing ----------------------------------------------------------------

def _require_obj(value: object, what: str) -> dict:
    if not isinstance(value, dict):
        raise SchemaViolation(f"{what} must be a JSON object")
    return value


def _entry_text(entry: dict, key: str, default: str = "") -> str:
    value = entry.get(key, default)
    if not isinstance(value, str):
        raise SchemaViolation(f"{key} must be text, got {value!r}")
    return value


def _check_entry_keys(entry: dict, allowed: set[str], where: str, strict: bool) -> None:
    unknown = set(entry) - allowed
    if not unknown:
        return
    msg = f"unknown keys {sorted(unknown)} in {where}"
    if strict:
        raise SchemaViolation(msg)
    warnings.warn(msg, StyleWarning, stacklevel=3)


def _parse_icon(name: str, entry: dict, strict: bool) -> IconSpec:
    _check_entry_keys(entry, {"explanation", "expectation"}, f"icon {name!r}", strict)
    if "expectation" not in entry:
        raise SchemaViolation(f"icon {name!r} missing expectation")
    return IconSpec(_entry_text(entry, "explanation"), _entry_text(entry, "expectation"))


def _parse_label(name: str, entry: dict, strict: bool) -> LabelStyle:
    _check_entry_keys(entry, {"explanation", "text-color", "text-halo-color"}, f"label {name!r}", strict)
    for key in ("text-color", "text-halo-color"):
        if key not in entry:
            raise SchemaViolation(f"label {name!r} missing {key}")
    return LabelStyle(_entry_text(entry, "explanation"), entry["text-color"], entry["text-halo-color"])


def _parse_line(name: str, entry: dict, strict: bool) -> LineStyle:
    _check_entry_keys(entry, {"explanation", "line-opacity", "line-color"}, f"line {name!r}", strict)
    for key in ("line-opacity", "line-color"):
        if key not in entry:
            raise SchemaViolation(f"line {name!r} missing {key}")
    return LineStyle(_entry_text(entry, "explanation"), entry["line-opacity"], entry["line-color"])


def _parse_fill(name: str, entry: dict, strict: bool) -> FillStyle:
    _check_entry_keys(
        entry, {"explanation", "fill-opacity", "fill-color", "fill-outline-color"}, f"fill {name!r}", strict
    )
    for key in ("fill-opacity", "fill-color", "fill-outline-color"):
        if key not in entry:
            raise SchemaViolation(f"fill {name!r} missing {key}")
    return FillStyle(
        _entry_text(entry, "explanation"), entry["fill-opacity"], entry["fill-color"], entry["fill-outline-color"]
    )


def parse_stylesheet(json_text: str, strict: bool = True) -> StyleSheet:
    """Parse a stylesheet document into the IR.

    Unknown keys are schema errors; pass ``strict=False`` to downgrade them
    to :class:`StyleWarning`. A missing background is always an error.
    """
    try:
        doc = json.loads(json_text)
    except json.JSONDecodeError as e:
        raise MalformedJson(str(e)) from e

    doc = _require_obj(doc, "stylesheet document")
    _check_entry_keys(doc, {"reasoning", "stylesheet"}, "document root", strict)
    body = _require_obj(doc.get("stylesheet"), '"stylesheet"')
    _check_entry_keys(body, set(_KEY_CATEGORIES), '"stylesheet"', strict)

    reasoning = _entry_text(doc, "reasoning")

    def category_entries(category: str) -> dict:
        raw = body.get(_CATEGORY_KEYS[category], {})
        return _require_obj(raw, f"category {_CATEGORY_KEYS[category]!r}")

    parsers = {
        CATEGORY_ICON: _parse_icon,
        CATEGORY_LABEL: _parse_label,
        CATEGORY_LINE: _parse_line,
        CATEGORY_FILL: _parse_fill,
    }
    parsed: dict[str, dict] = {}
    for category, parse_entry in parsers.items():
        out: dict[str, object] = {}
        for name, entry in category_entries(category).items():
            out[name] = parse_entry(name, _require_obj(entry, f"{category} entry {name!r}"), strict)
        parsed[category] = out

    if _CATEGORY_KEYS[CATEGORY_BACKGROUND] not in body:
        raise MissingBackground("stylesheet has no background entry")
    bg_entry = _require_obj(body[_CATEGORY_KEYS[CATEGORY_BACKGROUND]], "background")
    _check_entry_keys(bg_entry, {"explanation", "background-color"}, "background", strict)
    if "background-color" not in bg_entry:
        raise MissingBackground("background entry has no background-color")
    background = BackgroundStyle(_entry_text(bg_entry, "explanation"), bg_entry["background-color"])

    return StyleSheet(
        reasoning=reasoning,
        icons=parsed[CATEGORY_ICON],
        labels=parsed[CATEGORY_LABEL],
        lines=parsed[CATEGORY_LINE],
        fills=parsed[CATEGORY_FILL],
        background=background,
    )


# --- serialization ----------------------------------------------------------

def _icon_obj(spec: IconSpec) -> dict:
    return {"explanation": spec.explanation, "expectation": spec.expectation}


def _label_obj(style: LabelStyle) -> dict:
    return {
        "explanation": style.explanation,
        "text-color": style.text_color,
        "text-halo-color": style.text_halo_color,
    }


def _line_obj(style: LineStyle) -> dict:
    return {
        "explanation": style.explanation,
        "line-opacity": style.line_opacity,
        "line-color": style.line_color,
    }


def _fill_obj(style: FillStyle) -> dict:
    return {
        "explanation": style.explanation,
        "fill-opacity": style.fill_opacity,
        "fill-color": style.fill_color,
        "fill-outline-color": style.fill_outline_color,
    }


def stylesheet_to_dict(sheet: StyleSheet) -> dict:
    return {
        "reasoning": sheet.reasoning,
        "stylesheet": {
            _CATEGORY_KEYS[CATEGORY_ICON]: {n: _icon_obj(s) for n, s in sheet.icons.items()},
            _CATEGORY_KEYS[CATEGORY_LABEL]: {n: _label_obj(s) for n, s in sheet.labels.items()},
            _CATEGORY_KEYS[CATEGORY_LINE]: {n: _line_obj(s) for n, s in sheet.lines.items()},
            _CATEGORY_KEYS[CATEGORY_FILL]: {n: _fill_obj(s) for n, s in sheet.fills.items()},
            _CATEGORY_KEYS[CATEGORY_BACKGROUND]: {
                "explanation": sheet.background.explanation,
                "background-color": sheet.background.background_color,
            },
        },
    }


def serialize_stylesheet(sheet: StyleSheet) -> str:
    """Emit the interchange JSON; inverse of :func:`parse_stylesheet`."""
    return json.dumps(stylesheet_to_dict(sheet), indent=2, ensure_ascii=False) + "\n"


# --- completeness / suggestion application ----------------------------------

def validate_completeness(sheet: StyleSheet, manifest: LayerManifest) -> CompletenessReport:
    """Diff sheet entries against manifest elements, per category."""
    missing: list[tuple[str, str]] = []
    extraneous: list[tuple[str, str]] = []
    for category in (CATEGORY_ICON, CATEGORY_LABEL, CATEGORY_LINE, CATEGORY_FILL):
        wanted = manifest.elements(category)
        styled = sheet.category(category)
        missing.extend((category, name) for name in wanted if name not in styled)
        extraneous.extend((category, name) for name in styled if name not in wanted)
    return CompletenessReport(tuple(missing), tuple(extraneous))


_FIELD_FOR_VARIABLE = {
    "expectation": "expectation",
    "text-color": "text_color",
    "text-halo-color": "text_halo_color",
    "line-opacity": "line_opacity",
    "line-color": "line_color",
    "fill-opacity": "fill_opacity",
    "fill-color": "fill_color",
    "fill-outline-color": "fill_outline_color",
    "background-color": "background_color",
}


def apply_suggestions(sheet: StyleSheet, verdict: ReviewVerdict) -> StyleSheet:
    """Return a sheet with exactly the suggested variables replaced.

    An Accept verdict returns the input unchanged. Every suggestion must
    target an element present in the sheet.
    """
    if verdict.is_accept:
        return sheet

    new_background = sheet.background
    new_maps = {cat: dict(sheet.category(cat)) for cat in (CATEGORY_ICON, CATEGORY_LABEL, CATEGORY_LINE, CATEGORY_FILL)}

    for suggestion in verdict.suggestions:
        updates = {_FIELD_FOR_VARIABLE[name]: value for name, value in suggestion.changes}
        if suggestion.category == CATEGORY_BACKGROUND:
            new_background = replace(new_background, **updates)
            continue
        entries = new_maps[suggestion.category]
        if suggestion.element not in entries:
            raise UnknownElement(
                f"suggestion targets unknown {suggestion.category} element {suggestion.element!r}"
            )
        entries[suggestion.element] = replace(entries[suggestion.element], **updates)

    return StyleSheet(
        reasoning=sheet.reasoning,
        icons=new_maps[CATEGORY_ICON],
        labels=new_maps[CATEGORY_LABEL],
        lines=new_maps[CATEGORY_LINE],
        fills=new_maps[CATEGORY_FILL],
        background=new_background,
    )
