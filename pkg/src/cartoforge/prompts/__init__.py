"""Role prompt templates and parsers for the free-text replies they elicit.

Each agent role has a system prompt stored as a text resource with
``{{placeholder}}`` blanks. Rendering fills the blanks from a
:class:`PromptContext`; the result is byte-deterministic for equal inputs.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from importlib import resources

from ..errors import EmptyReply, MissingPlaceholder, NoJsonFound, SchemaViolation
from ..stylesheet import (
    LayerManifest,
    ReviewSuggestion,
    ReviewVerdict,
    StyleSheet,
    normalize_color,
    serialize_stylesheet,
)

ROLE_APPRECIATOR = "appreciator"
ROLE_STYLE_DESIGNER = "style_designer"
ROLE_ICON_DESIGNER = "icon_designer"
ROLE_FILE_IMPLEMENTER = "file_implementer"
ROLE_REVIEWER = "reviewer"

ROLE_IDS = (
    ROLE_APPRECIATOR,
    ROLE_STYLE_DESIGNER,
    ROLE_ICON_DESIGNER,
    ROLE_FILE_IMPLEMENTER,
    ROLE_REVIEWER,
)

# Rendering of the adjustable-variable inventory, shared by the designer
# and reviewer prompts.
DEFAULT_VARIABLES_BLOCK = """\
- For each icon element, you can describe the expected style in as much detail as possible, e.g., its content, color, theme, and design. The icon designer will design this icon according to your expectations;
- For each label element, you can set the text color and the text halo color;
- For each line element, you can set the line opacity and the line color;
- For each fill element, you can set the fill opacity, the fill color, and the fill outline color;
- For the background, you can set the background color."""

_PLACEHOLDER_RE = re.compile(r"\{\{(\w+)\}\}")

_DECLARED_PLACEHOLDERS = {
    ROLE_APPRECIATOR: frozenset(),
    ROLE_STYLE_DESIGNER: frozenset(
        {"icon_elements", "label_elements", "line_elements", "fill_elements", "variables_block"}
    ),
    ROLE_ICON_DESIGNER: frozenset({"element", "expectation"}),
    ROLE_FILE_IMPLEMENTER: frozenset({"stylesheet"}),
    ROLE_REVIEWER: frozenset(
        {"icon_elements", "label_elements", "line_elements", "fill_elements", "variables_block"}
    ),
}


@dataclass(frozen=True)
class RoleProfile:
    role_id: str
    system_prompt_template: str

    def __post_init__(self):
        used = set(_PLACEHOLDER_RE.findall(self.system_prompt_template))
        declared = _DECLARED_PLACEHOLDERS.get(self.role_id, frozenset())
        if not used <= declared:
            raise ValueError(
                f"template for {self.role_id!r} uses undeclared placeholders: {sorted(used - declared)}"
            )

    @property
    def template_hash(self) -> str:
        return hashlib.sha256(self.system_prompt_template.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ImageCaption:
    """Structured reading of an appreciator reply."""

    content: str
    color: str
    theme_design: str
    raw: str
    color_swatches: tuple[str, ...] = ()
    warning: bool = False

    def to_dict(self) -> dict:
        return {
            "content": self.content,
            "color": self.color,
            "theme_design": self.theme_design,
            "raw": self.raw,
            "color_swatches": list(self.color_swatches),
            "warning": self.warning,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ImageCaption":
        return cls(
            content=doc["content"],
            color=doc["color"],
            theme_design=doc["theme_design"],
            raw=doc["raw"],
            color_swatches=tuple(doc.get("color_swatches", ())),
            warning=bool(doc.get("warning", False)),
        )


@dataclass
class PromptContext:
    """Values available for filling a role template."""

    manifest: LayerManifest | None = None
    variables_block: str = DEFAULT_VARIABLES_BLOCK
    prior_stylesheet: StyleSheet | None = None
    verdict: ReviewVerdict | None = None
    caption: ImageCaption | None = None
    icon_element: str | None = None
    icon_expectation: str | None = None


def _load_template(role_id: str) -> str:
    return (resources.files(__package__) / "templates" / f"{role_id}.txt").read_text("utf-8")


def load_role_profiles() -> dict[str, RoleProfile]:
    return {role_id: RoleProfile(role_id, _load_template(role_id)) for role_id in ROLE_IDS}


def _element_list(names: tuple[str, ...]) -> str:
    return "; ".join(names) if names else "(none)"


def _placeholder_values(ctx: PromptContext) -> dict[str, str | None]:
    return {
        "icon_elements": _element_list(ctx.manifest.icon_elements) if ctx.manifest else None,
        "label_elements": _element_list(ctx.manifest.label_elements) if ctx.manifest else None,
        "line_elements": _element_list(ctx.manifest.line_elements) if ctx.manifest else None,
        "fill_elements": _element_list(ctx.manifest.fill_elements) if ctx.manifest else None,
        "variables_block": ctx.variables_block,
        "stylesheet": serialize_stylesheet(ctx.prior_stylesheet) if ctx.prior_stylesheet else None,
        "element": ctx.icon_element,
        "expectation": ctx.icon_expectation,
    }


def render_role_prompt(profile: RoleProfile, ctx: PromptContext) -> str:
    """Fill the role template's blanks from ctx; missing values are errors."""
    values = _placeholder_values(ctx)

    def fill(match: re.Match) -> str:
        name = match.group(1)
        value = values.get(name)
        if value is None:
            raise MissingPlaceholder(f"role {profile.role_id!r} requires {name!r}")
        return value

    return _PLACEHOLDER_RE.sub(fill, profile.system_prompt_template)


# --- user-turn composition ----------------------------------------------------

def compose_design_request(caption: ImageCaption) -> str:
    return (
        "Here is the reference image (attached) and its description:\n\n"
        f"{caption.raw}\n\n"
        "Please design the stylesheet now."
    )


def compose_revision_request(verdict: ReviewVerdict) -> str:
    return (
        "The map reviewer examined the styled map rendered from your stylesheet "
        "and requests a revision. Here is the feedback:\n\n"
        f"{serialize_verdict(verdict)}\n\n"
        "Please apply the suggested adjustments and return the full updated "
        "stylesheet in the same JSON format, restating every element."
    )


def compose_review_request() -> str:
    return (
        "The first attached image is the reference image; the second is the "
        "current styled map. Please return your verdict now."
    )


def compose_schema_reminder() -> str:
    return (
        "Your previous reply could not be parsed as a valid stylesheet. Please "
        "return only the JSON document, strictly following the required format: "
        '{"reasoning": ..., "stylesheet":{"symbol (icon)":{...}, "symbol (label)":{...}, '
        '"line":{...}, "fill":{...}, "background": {...}}}, with all colors in '
        "hexadecimal format and opacities between 0 and 1, covering every element."
    )


# --- reply parsing --------------------------------------------------------------

def extract_json_block(reply: str) -> str:
    """Return the first balanced, parseable top-level JSON object in reply."""
    start = reply.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(reply)):
            ch = reply[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    candidate = reply[start : i + 1]
                    try:
                        json.loads(candidate)
                    except json.JSONDecodeError:
                        break
                    return candidate
        start = reply.find("{", start + 1)
    raise NoJsonFound("reply contains no parseable JSON object")


_HEX_TOKEN_RE = re.compile(r"#[0-9a-fA-F]{6}\b")
_BARE_HEADING_RE = re.compile(
    r"^[\s#>*\-]*(content|color|theme\s*&\s*design|theme\s*and\s*design)[\s:*]*$", re.I
)
_INLINE_HEADING_RE = re.compile(
    r"^[\s#>*\-]*(content|color|theme\s*&\s*design|theme\s*and\s*design)[*]*\s*:[*]*\s*(\S.*)$", re.I
)

_SECTION_FOR_HEADING = {"content": "content", "color": "color"}


def _section_key(heading: str) -> str:
    word = re.sub(r"\s+", " ", heading.strip().lower())
    return _SECTION_FOR_HEADING.get(word, "theme_design")


def parse_appreciator_reply(reply: str) -> ImageCaption:
    """Split a caption reply into Content / Color / Theme & Design sections.

    Sectioning is best-effort: replies that cannot be split keep all text in
    ``content`` and set the ``warning`` flag. Hex tokens found in the Color
    section become the swatch list.
    """
    if not reply.strip():
        raise EmptyReply("appreciator reply is empty")

    sections: dict[str, list[str]] = {"content": [], "color": [], "theme_design": []}
    current: str | None = None
    for line in reply.splitlines():
        bare = _BARE_HEADING_RE.match(line)
        inline = None if bare else _INLINE_HEADING_RE.match(line)
        if bare:
            current = _section_key(bare.group(1))
            continue
        if inline:
            current = _section_key(inline.group(1))
            sections[current].append(inline.group(2))
            continue
        if current is not None:
            sections[current].append(line)

    content = "\n".join(sections["content"]).strip()
    color = "\n".join(sections["color"]).strip()
    theme = "\n".join(sections["theme_design"]).strip()
    warning = not (content and color and theme)
    if not (content or color or theme):
        content = reply.strip()
        warning = True

    swatches: list[str] = []
    for token in _HEX_TOKEN_RE.findall(color):
        c = normalize_color(token)
        if c not in swatches:
            swatches.append(c)
    return ImageCaption(content, color, theme, reply, tuple(swatches), warning)


def serialize_verdict(verdict: ReviewVerdict) -> str:
    """Emit a verdict in the reviewer's mandated output JSON."""
    return json.dumps(
        {
            "decision": verdict.decision,
            "commentary": verdict.commentary,
            "suggestions": [
                {
                    "element": s.element,
                    "category": s.category,
                    "changes": s.changes_dict,
                    "explanation": s.explanation,
                }
                for s in verdict.suggestions
            ],
        },
        indent=2,
        ensure_ascii=False,
    )


def parse_reviewer_reply(reply: str) -> ReviewVerdict:
    """Parse the reviewer's mandated output JSON into a verdict."""
    if not reply.strip():
        raise EmptyReply("reviewer reply is empty")
    doc = json.loads(extract_json_block(reply))
    if "decision" not in doc:
        raise SchemaViolation('reviewer reply is missing the "decision" field')
    decision = "Accept" if doc["decision"] == "Accept" else "Revise"

    raw_suggestions = doc.get("suggestions", [])
    if not isinstance(raw_suggestions, list):
        raise SchemaViolation('"suggestions" must be a list')
    suggestions = []
    for item in raw_suggestions:
        if not isinstance(item, dict):
            raise SchemaViolation("each suggestion must be a JSON object")
        missing = {"element", "category", "changes"} - set(item)
        if missing:
            raise SchemaViolation(f"suggestion missing keys: {sorted(missing)}")
        if not isinstance(item["changes"], dict):
            raise SchemaViolation('suggestion "changes" must be an object')
        suggestions.append(
            ReviewSuggestion(
                element=item["element"],
                category=item["category"],
                changes=tuple(item["changes"].items()),
                explanation=item.get("explanation", ""),
            )
        )
    commentary = doc.get("commentary", reply)
    return ReviewVerdict(decision, tuple(suggestions), commentary)
