from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cartoforge.errors import (
    IllegalVariableForCategory,
    MalformedJson,
    MissingBackground,
    SchemaViolation,
    UnknownElement,
)
from cartoforge.stylesheet import (
    BackgroundStyle,
    FillStyle,
    IconSpec,
    LabelStyle,
    LayerManifest,
    LineStyle,
    ReviewSuggestion,
    ReviewVerdict,
    StyleSheet,
    StyleWarning,
    apply_suggestions,
    normalize_color,
    parse_stylesheet,
    serialize_stylesheet,
    validate_completeness,
)
from helpers import WARM_PALETTE_SUGGESTIONS, complete_sheet, sunflowers_lines_text

MINIMAL = '{"reasoning":"r","stylesheet":{"background":{"explanation":"e","background-color":"#000000"}}}'


class TestColor:
    def test_normalizes_to_lowercase(self):
        assert normalize_color("#8B0000") == "#8b0000"

    def test_expands_three_digit_shorthand(self):
        assert normalize_color("#AbC") == "#aabbcc"

    @pytest.mark.parametrize("bad", ["8b0000", "#8b00", "#8b000g", "", "#8b00001", 5, None])
    def test_rejects_malformed(self, bad):
        with pytest.raises(SchemaViolation):
            normalize_color(bad)

    @given(st.integers(min_value=0, max_value=0xFFFFFF))
    def test_normalization_idempotent(self, value):
        color = f"#{value:06X}"
        once = normalize_color(color)
        assert normalize_color(once) == once


class TestParse:
    def test_sunflowers_primary_road_values(self, sunflowers_sheet):
        road = sunflowers_sheet.lines["Primary_Road"]
        assert road == LineStyle(road.explanation, 1.0, "#8b0000")

    def test_sunflowers_all_line_values(self, sunflowers_sheet):
        expected = {
            "Pedestrian": (0.8, "#e0c547"),
            "Street": (0.9, "#8b4513"),
            "Tertiary_Road": (0.85, "#f5d033"),
            "Secondary_Road": (0.9, "#ffc300"),
            "Primary_Road": (1.0, "#8b0000"),
            "Ferry": (0.7, "#556b2f"),
        }
        got = {n: (s.line_opacity, s.line_color) for n, s in sunflowers_sheet.lines.items()}
        assert got == expected

    def test_minimal_background_only(self):
        sheet = parse_stylesheet(MINIMAL)
        assert sheet.background.background_color == "#000000"
        assert not sheet.icons and not sheet.labels and not sheet.lines and not sheet.fills

    def test_opacity_out_of_range(self):
        doc = json.loads(MINIMAL)
        doc["stylesheet"]["line"] = {"Road": {"line-opacity": 1.5, "line-color": "#112233"}}
        with pytest.raises(SchemaViolation):
            parse_stylesheet(json.dumps(doc))

    def test_missing_background_is_error(self):
        with pytest.raises(MissingBackground):
            parse_stylesheet('{"reasoning":"r","stylesheet":{"line":{}}}')

    def test_malformed_json(self):
        with pytest.raises(MalformedJson):
            parse_stylesheet("{not json")

    def test_unknown_category_key_rejected(self):
        doc = json.loads(MINIMAL)
        doc["stylesheet"]["circles"] = {}
        with pytest.raises(SchemaViolation):
            parse_stylesheet(json.dumps(doc))

    def test_unknown_entry_key_rejected_strict(self):
        doc = json.loads(MINIMAL)
        doc["stylesheet"]["background"]["glow"] = 1
        with pytest.raises(SchemaViolation):
            parse_stylesheet(json.dumps(doc))

    def test_tolerant_mode_downgrades_unknown_keys(self):
        doc = json.loads(MINIMAL)
        doc["stylesheet"]["background"]["glow"] = 1
        with pytest.warns(StyleWarning):
            sheet = parse_stylesheet(json.dumps(doc), strict=False)
        assert sheet.background.background_color == "#000000"

    def test_mixed_case_color_normalized_on_parse(self):
        sheet = parse_stylesheet(MINIMAL.replace("#000000", "#FAF3D3"))
        assert sheet.background.background_color == "#faf3d3"


class TestSerialize:
    def test_minimal_contains_background_key(self):
        text = serialize_stylesheet(parse_stylesheet(MINIMAL))
        assert '"background-color"' in text

    def test_sunflowers_round_trip(self, sunflowers_sheet):
        assert parse_stylesheet(serialize_stylesheet(sunflowers_sheet)) == sunflowers_sheet

    def test_fill_insertion_order_preserved(self):
        sheet = StyleSheet(
            reasoning="",
            fills={
                "Zebra": FillStyle("", 1.0, "#111111", "#222222"),
                "Alpha": FillStyle("", 1.0, "#333333", "#444444"),
            },
            background=BackgroundStyle("", "#ffffff"),
        )
        text = serialize_stylesheet(sheet)
        assert text.index("Zebra") < text.index("Alpha")
        reparsed = parse_stylesheet(text)
        assert list(reparsed.fills) == ["Zebra", "Alpha"]

    def test_order_sensitive_equality(self):
        a = StyleSheet(
            reasoning="",
            fills={
                "A": FillStyle("", 1.0, "#111111", "#222222"),
                "B": FillStyle("", 1.0, "#333333", "#444444"),
            },
            background=BackgroundStyle("", "#ffffff"),
        )
        b = StyleSheet(
            reasoning="",
            fills={
                "B": FillStyle("", 1.0, "#333333", "#444444"),
                "A": FillStyle("", 1.0, "#111111", "#222222"),
            },
            background=BackgroundStyle("", "#ffffff"),
        )
        assert a != b


class TestCompleteness:
    def test_missing_fill_reported(self):
        manifest = LayerManifest(fill_elements=("Park", "Water"))
        sheet = StyleSheet(
            reasoning="",
            fills={"Park": FillStyle("", 1.0, "#111111", "#222222")},
            background=BackgroundStyle("", "#ffffff"),
        )
        report = validate_completeness(sheet, manifest)
        assert report.missing == (("fill", "Water"),)
        assert not report.extraneous and not report.is_complete

    def test_neighborhood_sheet_is_complete(self, neighborhood_manifest, neighborhood_sheet):
        assert validate_completeness(neighborhood_sheet, neighborhood_manifest).is_complete

    def test_extraneous_entry_reported(self):
        manifest = LayerManifest(fill_elements=("Park",))
        sheet = StyleSheet(
            reasoning="",
            fills={
                "Park": FillStyle("", 1.0, "#111111", "#222222"),
                "Canal": FillStyle("", 1.0, "#333333", "#444444"),
            },
            background=BackgroundStyle("", "#ffffff"),
        )
        report = validate_completeness(sheet, manifest)
        assert report.extraneous == (("fill", "Canal"),)


def _park_water_sheet() -> StyleSheet:
    return StyleSheet(
        reasoning="",
        lines={
            "Primary road": LineStyle("", 1.0, "#00ffff"),
            "Street": LineStyle("", 0.5, "#ff0080"),
        },
        labels={
            "Natural landscape": LabelStyle("", "#111111", "#222222"),
            "Primary road": LabelStyle("", "#111111", "#222222"),
        },
        fills={
            "Park": FillStyle("", 0.5, "#00ff00", "#008800"),
            "Water": FillStyle("", 0.5, "#0000ff", "#000088"),
        },
        background=BackgroundStyle("", "#101010"),
    )


class TestApplySuggestions:
    def test_background_row(self):
        sheet = _park_water_sheet()
        verdict = ReviewVerdict(
            "Revise",
            (ReviewSuggestion("background", "background", {"background-color": "#FAF3D3"}),),
        )
        out = apply_suggestions(sheet, verdict)
        assert out.background.background_color == "#faf3d3"
        assert out.fills == sheet.fills and out.lines == sheet.lines

    def test_accept_is_identity(self):
        sheet = _park_water_sheet()
        assert apply_suggestions(sheet, ReviewVerdict("Accept")) is sheet

    def test_water_row_leaves_park_untouched(self):
        sheet = _park_water_sheet()
        verdict = ReviewVerdict(
            "Revise",
            (
                ReviewSuggestion(
                    "Water",
                    "fill",
                    {"fill-color": "#AFCDE7", "fill-opacity": 0.9, "fill-outline-color": "#87B0D9"},
                ),
            ),
        )
        out = apply_suggestions(sheet, verdict)
        water = out.fills["Water"]
        assert (water.fill_color, water.fill_opacity, water.fill_outline_color) == (
            "#afcde7",
            0.9,
            "#87b0d9",
        )
        assert out.fills["Park"] == sheet.fills["Park"]

    def test_full_warm_palette_application(self):
        sheet = _park_water_sheet()
        out = apply_suggestions(sheet, ReviewVerdict("Revise", tuple(WARM_PALETTE_SUGGESTIONS)))
        assert out.background.background_color == "#faf3d3"
        assert out.fills["Water"].fill_color == "#afcde7"
        assert out.fills["Park"].fill_outline_color == "#6b8e23"
        assert out.lines["Street"].line_opacity == 0.8
        assert out.labels["Primary road"].text_color == "#b74e3e"

    def test_only_named_leaves_change(self):
        sheet = _park_water_sheet()
        verdict = ReviewVerdict("Revise", tuple(WARM_PALETTE_SUGGESTIONS))
        out = apply_suggestions(sheet, verdict)
        total_changes = sum(len(s.changes) for s in verdict.suggestions)

        def leaves(s: StyleSheet) -> list:
            vals = [s.background.explanation, s.background.background_color, s.reasoning]
            for cat in (s.icons, s.labels, s.lines, s.fills):
                for name, entry in cat.items():
                    for field in entry.__dataclass_fields__:
                        vals.append((name, field, getattr(entry, field)))
            return vals

        before, after = leaves(sheet), leaves(out)
        changed = sum(1 for a, b in zip(before, after) if a != b)
        assert changed == total_changes

    def test_unknown_element(self):
        verdict = ReviewVerdict(
            "Revise", (ReviewSuggestion("Canal", "fill", {"fill-color": "#111111"}),)
        )
        with pytest.raises(UnknownElement):
            apply_suggestions(_park_water_sheet(), verdict)

    def test_illegal_variable_for_category(self):
        with pytest.raises(IllegalVariableForCategory):
            ReviewSuggestion("Park", "fill", {"line-color": "#111111"})


class TestVerdictInvariants:
    def test_accept_with_suggestions_rejected(self):
        with pytest.raises(SchemaViolation):
            ReviewVerdict("Accept", (ReviewSuggestion("background", "background", {"background-color": "#000000"}),))

    def test_revise_requires_suggestions(self):
        with pytest.raises(SchemaViolation):
            ReviewVerdict("Revise", ())


# --- property tests --------------------------------------------------------------

_names = st.lists(
    st.text(alphabet="ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz_ ", min_size=1, max_size=12).map(str.strip).filter(bool),
    max_size=4,
    unique=True,
)
_color = st.integers(min_value=0, max_value=0xFFFFFF).map(lambda v: f"#{v:06x}")
_opacity = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


@st.composite
def random_sheet(draw):
    manifest = LayerManifest(
        icon_elements=tuple(draw(_names)),
        label_elements=tuple(draw(_names)),
        line_elements=tuple(draw(_names)),
        fill_elements=tuple(draw(st.lists(st.sampled_from(["Park", "Water", "Grass", "Sand"]), min_size=1, max_size=4, unique=True))),
    )
    sheet = StyleSheet(
        reasoning=draw(st.text(max_size=20)),
        icons={n: IconSpec("", draw(st.text(min_size=1, max_size=20))) for n in manifest.icon_elements},
        labels={n: LabelStyle("", draw(_color), draw(_color)) for n in manifest.label_elements},
        lines={n: LineStyle("", draw(_opacity), draw(_color)) for n in manifest.line_elements},
        fills={n: FillStyle("", draw(_opacity), draw(_color), draw(_color)) for n in manifest.fill_elements},
        background=BackgroundStyle("", draw(_color)),
    )
    return manifest, sheet


@settings(max_examples=50, deadline=None)
@given(random_sheet())
def test_random_sheets_round_trip_and_complete(pair):
    manifest, sheet = pair
    assert parse_stylesheet(serialize_stylesheet(sheet)) == sheet
    assert validate_completeness(sheet, manifest).is_complete


def test_complete_sheet_helper_matches_manifest(neighborhood_manifest):
    sheet = complete_sheet(neighborhood_manifest)
    assert validate_completeness(sheet, neighborhood_manifest).is_complete
    assert parse_stylesheet(serialize_stylesheet(sheet)) == sheet


def test_sunflowers_reparse_equals_original_text_parse():
    text = sunflowers_lines_text()
    first = parse_stylesheet(text)
    second = parse_stylesheet(serialize_stylesheet(first))
    assert first == second
