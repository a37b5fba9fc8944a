from __future__ import annotations

import filecmp
import json
from pathlib import Path

import pytest

from cartoforge.compiler import layer_key
from cartoforge.dataset import build_dataset
from cartoforge.errors import AwaitingHumanVerdict, CartoforgeError, ReplayMiss, SessionTerminated
from cartoforge.gateway import KIND_REMOTE_CHAT, KIND_REMOTE_IMAGE, KIND_REPLAY, ProviderConfig
from cartoforge.orchestrator import (
    HumanReviewer,
    Orchestrator,
    PlaceholderIconSource,
    RoleBundle,
    ScriptedCaptionSource,
    ScriptedDesigner,
    ScriptedReviewer,
    build_roles,
    run_transfer,
)
from cartoforge.session import RunConfig, SessionStore
from cartoforge.stylesheet import (
    ReviewSuggestion,
    ReviewVerdict,
    serialize_stylesheet,
)
from helpers import (
    FakeTransport,
    chat_body,
    collection,
    feature,
    image_body,
    rect_polygon,
    scenario_collage,
    scenario_dataset,
    scenario_initial_sheet,
    scenario_verdicts,
    solid_png,
)

REVISE_BG = ReviewVerdict(
    "Revise",
    (ReviewSuggestion("background", "background", {"background-color": "#000000"}),),
)


def scripted_roles(verdicts, sheet=None):
    return RoleBundle(
        ScriptedCaptionSource(),
        ScriptedDesigner(sheet or scenario_initial_sheet()),
        ScriptedReviewer(verdicts),
        PlaceholderIconSource(),
    )


def scripted_config(run_id: str, **kw) -> RunConfig:
    defaults = dict(
        bins_per_channel=10,
        reviewer_source="scripted",
        designer_source="scripted",
        viewport=(96, 96),
        initial_stylesheet=serialize_stylesheet(scenario_initial_sheet()),
        run_id=run_id,
    )
    defaults.update(kw)
    return RunConfig(**defaults)


class TestLoopContracts:
    def test_accept_at_zero_single_iteration(self, tmp_path):
        store = SessionStore(tmp_path)
        orchestrator = Orchestrator(
            scenario_collage(), scenario_dataset(), scripted_config("a0"),
            scripted_roles([ReviewVerdict("Accept")]), store, "a0",
        )
        session = orchestrator.run()
        assert len(session.iterations) == 1
        assert session.terminated_by == "accept"
        assert session.iterations[0].verdict.is_accept

    def test_never_accept_stops_at_cap(self, tmp_path):
        store = SessionStore(tmp_path)
        flip = ReviewVerdict(
            "Revise", (ReviewSuggestion("background", "background", {"background-color": "#123456"}),)
        )
        flop = ReviewVerdict(
            "Revise", (ReviewSuggestion("background", "background", {"background-color": "#654321"}),)
        )
        orchestrator = Orchestrator(
            scenario_collage(), scenario_dataset(), scripted_config("cap5", max_iterations=5),
            scripted_roles(lambda k: flip if k % 2 == 0 else flop), store, "cap5",
        )
        session = orchestrator.run()
        assert len(session.iterations) == 5
        assert session.terminated_by == "cap"
        assert not session.iterations[-1].verdict.is_accept

    def test_iterations_indexed_contiguously(self, tmp_path):
        store = SessionStore(tmp_path)
        orchestrator = Orchestrator(
            scenario_collage(), scenario_dataset(), scripted_config("idx"),
            scripted_roles(scenario_verdicts()), store, "idx",
        )
        session = orchestrator.run()
        assert [r.index for r in session.iterations] == list(range(len(session.iterations)))

    def test_step_after_termination_raises(self, tmp_path):
        store = SessionStore(tmp_path)
        orchestrator = Orchestrator(
            scenario_collage(), scenario_dataset(), scripted_config("done"),
            scripted_roles([ReviewVerdict("Accept")]), store, "done",
        )
        orchestrator.run()
        with pytest.raises(SessionTerminated):
            orchestrator.step()

    def test_designer_not_asked_to_revise_after_cap(self, tmp_path):
        calls = []

        class CountingDesigner(ScriptedDesigner):
            def revise(self, sheet, verdict):
                calls.append(verdict)
                return super().revise(sheet, verdict)

        store = SessionStore(tmp_path)
        roles = RoleBundle(
            ScriptedCaptionSource(),
            CountingDesigner(scenario_initial_sheet()),
            ScriptedReviewer(lambda k: REVISE_BG if k == 0 else ReviewVerdict(
                "Revise", (ReviewSuggestion("background", "background", {"background-color": "#111111"}),)
            )),
            PlaceholderIconSource(),
        )
        orchestrator = Orchestrator(
            scenario_collage(), scenario_dataset(), scripted_config("cap2", max_iterations=2),
            roles, store, "cap2",
        )
        orchestrator.run()
        assert len(calls) == 1  # revise after iteration 0 only; cap reached after iteration 1

    def test_events_sequence(self, tmp_path):
        events = []
        store = SessionStore(tmp_path)
        orchestrator = Orchestrator(
            scenario_collage(), scenario_dataset(), scripted_config("ev"),
            scripted_roles(scenario_verdicts()), store, "ev", on_event=events.append,
        )
        session = orchestrator.run()
        kinds = [e["kind"] for e in events]
        n = len(session.iterations)
        assert kinds == ["iteration-started", "iteration-completed"] * n + ["run-terminated"]
        completed = [e["iteration"] for e in events if e["kind"] == "iteration-completed"]
        assert completed == sorted(completed)


class TestHumanMode:
    def _orchestrator(self, tmp_path):
        store = SessionStore(tmp_path)
        reviewer = HumanReviewer()
        roles = RoleBundle(
            ScriptedCaptionSource(), ScriptedDesigner(scenario_initial_sheet()), reviewer, PlaceholderIconSource()
        )
        config = scripted_config("human", reviewer_source="human")
        return Orchestrator(scenario_collage(), scenario_dataset(), config, roles, store, "human"), store

    def test_step_without_verdict_raises(self, tmp_path):
        orchestrator, store = self._orchestrator(tmp_path)
        with pytest.raises(AwaitingHumanVerdict):
            orchestrator.step()
        # the awaiting iteration's assets are persisted for the reviewer to see
        index = store.read_index("human")
        assert index["pending"]["index"] == 0
        assert (store.run_dir("human") / "iterations" / "0" / "map.png").exists()

    def test_verdict_drives_next_iteration(self, tmp_path):
        orchestrator, store = self._orchestrator(tmp_path)
        with pytest.raises(AwaitingHumanVerdict):
            orchestrator.step()
        orchestrator.post_verdict(REVISE_BG)
        record0 = orchestrator.step()
        assert record0.index == 0 and not record0.verdict.is_accept

        with pytest.raises(AwaitingHumanVerdict):
            orchestrator.step()
        orchestrator.post_verdict(ReviewVerdict("Accept"))
        record1 = orchestrator.step()
        assert record1.index == 1 and record1.verdict.is_accept
        assert orchestrator.session.terminated_by == "accept"

        before, after = record0.stylesheet, record1.stylesheet
        assert after.background.background_color == "#000000"
        assert after.fills == before.fills
        assert after.lines == before.lines
        assert after.labels == before.labels

    def test_post_verdict_requires_awaiting_iteration(self, tmp_path):
        orchestrator, _ = self._orchestrator(tmp_path)
        with pytest.raises(CartoforgeError):
            orchestrator.post_verdict(ReviewVerdict("Accept"))

    def test_post_verdict_requires_human_reviewer(self, tmp_path):
        store = SessionStore(tmp_path)
        orchestrator = Orchestrator(
            scenario_collage(), scenario_dataset(), scripted_config("nothuman"),
            scripted_roles([ReviewVerdict("Accept")]), store, "nothuman",
        )
        with pytest.raises(CartoforgeError):
            orchestrator.post_verdict(ReviewVerdict("Accept"))


class CountingIcons(PlaceholderIconSource):
    def __init__(self):
        super().__init__()
        self.calls: list[tuple[str, str]] = []

    def generate(self, element, expectation):
        self.calls.append((element, expectation))
        return super().generate(element, expectation)


class TestIconRegeneration:
    def _setup(self, tmp_path, policy: str):
        from cartoforge.stylesheet import BackgroundStyle, IconSpec, LayerManifest, StyleSheet

        manifest = LayerManifest(icon_elements=("Station",))
        layers = {
            layer_key("icon", "Station"): collection(
                feature({"type": "Point", "coordinates": [0.5, 0.5]})
            )
        }
        dataset = build_dataset(manifest, layers, (0.0, 0.0, 1.0, 1.0))
        sheet = StyleSheet(
            reasoning="",
            icons={"Station": IconSpec("", "v1")},
            background=BackgroundStyle("", "#ffffff"),
        )
        verdicts = [
            ReviewVerdict("Revise", (ReviewSuggestion("background", "background", {"background-color": "#222222"}),)),
            ReviewVerdict("Revise", (ReviewSuggestion("Station", "icon", {"expectation": "v2"}),)),
            ReviewVerdict("Accept"),
        ]
        icons = CountingIcons()
        roles = RoleBundle(ScriptedCaptionSource(), ScriptedDesigner(sheet), ScriptedReviewer(verdicts), icons)
        config = scripted_config(f"icons-{policy}", icon_regen_policy=policy,
                                 initial_stylesheet=serialize_stylesheet(sheet))
        store = SessionStore(tmp_path)
        return Orchestrator(solid_png((9, 9, 9), 64, 64), dataset, config, roles, store, f"icons-{policy}"), icons

    def test_regenerates_only_on_expectation_change(self, tmp_path):
        orchestrator, icons = self._setup(tmp_path, "on-expectation-change")
        session = orchestrator.run()
        assert len(session.iterations) == 3
        assert icons.calls == [("Station", "v1"), ("Station", "v2")]

    def test_every_iteration_policy(self, tmp_path):
        orchestrator, icons = self._setup(tmp_path, "every-iteration")
        session = orchestrator.run()
        assert len(session.iterations) == 3
        assert [e for e, _ in icons.calls] == ["Station", "Station", "Station"]


# --- MLLM loop against canned transports: memory semantics, record/replay --------

CHAT_URLS = {
    "appreciator": "https://fake.test/chat/appreciator",
    "style_designer": "https://fake.test/chat/designer",
    "reviewer": "https://fake.test/chat/reviewer",
}
IMAGE_URL = "https://fake.test/images"

CAPTION_TEXT = (
    "Content\nA small harbor scene with a park and open water.\n"
    "Color\nSoft greens (#3f7a45) and blues (#35618e) on a pale ground (#f0ead8).\n"
    "Theme & Design\nCalm, simple, flat shapes.\n"
)


def mllm_sheet(background: str, park: str, water: str) -> str:
    doc = {
        "reasoning": "match the harbor palette",
        "stylesheet": {
            "symbol (icon)": {
                "Metro station": {"explanation": "transit marker", "expectation": "a circled M in deep blue"}
            },
            "symbol (label)": {},
            "line": {},
            "fill": {
                "Park": {"explanation": "green space", "fill-opacity": 0.8, "fill-color": park,
                         "fill-outline-color": "#1e4023"},
                "Water": {"explanation": "open water", "fill-opacity": 0.9, "fill-color": water,
                          "fill-outline-color": "#223a55"},
            },
            "background": {"explanation": "paper tone", "background-color": background},
        },
    }
    return "Here is the stylesheet:\n```json\n" + json.dumps(doc, indent=1) + "\n```"


def reviewer_revision(comment: str, color: str) -> str:
    return json.dumps(
        {
            "decision": "Revise",
            "commentary": comment,
            "suggestions": [
                {"element": "background", "category": "background",
                 "changes": {"background-color": color}, "explanation": comment}
            ],
        }
    )


def mllm_fixture_inputs():
    from cartoforge.stylesheet import LayerManifest

    manifest = LayerManifest(icon_elements=("Metro station",), fill_elements=("Park", "Water"))
    layers = {
        layer_key("icon", "Metro station"): collection(
            feature({"type": "Point", "coordinates": [0.3, 0.35]})
        ),
        layer_key("fill", "Park"): collection(feature(rect_polygon(0.05, 0.1, 0.45, 0.9))),
        layer_key("fill", "Water"): collection(feature(rect_polygon(0.55, 0.1, 0.95, 0.9))),
    }
    dataset = build_dataset(manifest, layers, (0.0, 0.0, 1.0, 1.0))
    inspiration = solid_png((240, 234, 216), 48, 48)
    return inspiration, dataset


def make_mllm_transport() -> FakeTransport:
    return FakeTransport(
        {
            CHAT_URLS["appreciator"]: [(200, chat_body(CAPTION_TEXT))],
            CHAT_URLS["style_designer"]: [
                (200, chat_body(mllm_sheet("#fdfdf4", "#44aa44", "#3366aa"))),
                (200, chat_body(mllm_sheet("#f0ead8", "#3f7a45", "#3366aa"))),
                (200, chat_body(mllm_sheet("#f0ead8", "#3f7a45", "#35618e"))),
            ],
            CHAT_URLS["reviewer"]: [
                (200, chat_body(reviewer_revision("round-one-bg-note", "#f0ead8"))),
                (200, chat_body(reviewer_revision("round-two-water-note", "#f0ead8"))),
                (200, chat_body(json.dumps({"decision": "Accept", "commentary": "matches", "suggestions": []}))),
            ],
            IMAGE_URL: [(200, image_body(solid_png((20, 40, 200), 64, 64)))],
        }
    )


def mllm_config(fixture: Path | None, run_id: str, replay: bool) -> RunConfig:
    if replay:
        providers = {
            role: ProviderConfig(kind=KIND_REPLAY, fixture_path=str(fixture), model="chat-model")
            for role in CHAT_URLS
        }
        providers["icon_designer"] = ProviderConfig(
            kind=KIND_REPLAY, fixture_path=str(fixture), model="image-model"
        )
    else:
        providers = {
            role: ProviderConfig(kind=KIND_REMOTE_CHAT, endpoint=url, model="chat-model")
            for role, url in CHAT_URLS.items()
        }
        providers["icon_designer"] = ProviderConfig(
            kind=KIND_REMOTE_IMAGE, endpoint=IMAGE_URL, model="image-model"
        )
    return RunConfig(
        bins_per_channel=10,
        viewport=(96, 64),
        providers=providers,
        record_fixture=str(fixture) if not replay and fixture else None,
        run_id=run_id,
    )


def run_mllm(tmp_path, runs_name: str, run_id: str, fixture: Path | None, replay: bool,
             transport=None):
    inspiration, dataset = mllm_fixture_inputs()
    config = mllm_config(fixture, run_id, replay)
    store = SessionStore(tmp_path / runs_name)
    roles = build_roles(config, dataset.manifest, transport=transport, sleep=lambda s: None)
    orchestrator = Orchestrator(inspiration, dataset, config, roles, store, run_id)
    return orchestrator.run(), store


def tree_files(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestMllmLoop:
    def test_three_iterations_then_accept(self, tmp_path):
        transport = make_mllm_transport()
        session, _ = run_mllm(tmp_path, "runs", "rec", tmp_path / "fixture.jsonl", replay=False,
                              transport=transport)
        assert session.terminated_by == "accept"
        assert len(session.iterations) == 3
        assert session.iterations[0].stylesheet.background.background_color == "#fdfdf4"
        assert session.iterations[2].stylesheet.fills["Water"].fill_color == "#35618e"

    def test_reviewer_sessions_are_fresh(self, tmp_path):
        transport = make_mllm_transport()
        run_mllm(tmp_path, "runs", "fresh", tmp_path / "fixture.jsonl", replay=False, transport=transport)
        reviewer_payloads = transport.payloads_for(CHAT_URLS["reviewer"])
        assert len(reviewer_payloads) == 3
        for k, payload in enumerate(reviewer_payloads):
            roles = [m["role"] for m in payload["messages"]]
            assert roles == ["system", "user"]
            body = json.dumps(payload)
            # no text from earlier iterations in any request
            if k < 1:
                assert "round-one-bg-note" not in body
            if k < 2:
                assert "round-two-water-note" not in body

    def test_designer_memory_carries_prior_sheet_and_verdict(self, tmp_path):
        transport = make_mllm_transport()
        run_mllm(tmp_path, "runs", "memory", tmp_path / "fixture.jsonl", replay=False, transport=transport)
        designer_payloads = transport.payloads_for(CHAT_URLS["style_designer"])
        assert len(designer_payloads) == 3
        second = json.dumps(designer_payloads[1])
        assert "#fdfdf4" in second          # prior stylesheet in transcript
        assert "round-one-bg-note" in second  # verdict text in revision request
        third = json.dumps(designer_payloads[2])
        assert "round-two-water-note" in third

    def test_icon_generated_once_when_expectation_stable(self, tmp_path):
        transport = make_mllm_transport()
        run_mllm(tmp_path, "runs", "icons", tmp_path / "fixture.jsonl", replay=False, transport=transport)
        assert len(transport.payloads_for(IMAGE_URL)) == 1


class TestRecordReplayPipeline:
    def test_replay_reproduces_artifacts_and_is_bit_stable(self, tmp_path):
        fixture = tmp_path / "fixture.jsonl"
        transport = make_mllm_transport()
        record_session, record_store = run_mllm(tmp_path, "runs-record", "same-id", fixture, replay=False,
                                                transport=transport)
        replay1, store1 = run_mllm(tmp_path, "runs-replay1", "same-id", fixture, replay=True)
        replay2, store2 = run_mllm(tmp_path, "runs-replay2", "same-id", fixture, replay=True)

        assert len(replay1.iterations) == 3 and replay1.terminated_by == "accept"

        rec = tree_files(record_store.run_dir("same-id"))
        rp1 = tree_files(store1.run_dir("same-id"))
        rp2 = tree_files(store2.run_dir("same-id"))
        # two replays are bit-identical in full
        assert rp1 == rp2
        # replay reproduces the recorded run's artifacts (config differs by provider wiring)
        rec.pop("config.json")
        rp1b = dict(rp1)
        rp1b.pop("config.json")
        assert rec == rp1b

    def test_fixture_record_count(self, tmp_path):
        fixture = tmp_path / "fixture.jsonl"
        run_mllm(tmp_path, "runs", "counts", fixture, replay=False, transport=make_mllm_transport())
        records = [json.loads(l) for l in fixture.read_text().splitlines() if l.strip()]
        kinds = [r["kind"] for r in records if r["kind"] != "config"]
        assert kinds.count("chat") == 7  # 1 caption + 3 designer + 3 reviewer
        assert kinds.count("image") == 1

    def test_replay_drift_aborts_run(self, tmp_path):
        fixture = tmp_path / "fixture.jsonl"
        run_mllm(tmp_path, "runs", "drift", fixture, replay=False, transport=make_mllm_transport())
        # different dataset -> different designer prompt -> digest drift
        inspiration, dataset = mllm_fixture_inputs()
        from cartoforge.stylesheet import LayerManifest

        bigger = LayerManifest(
            icon_elements=("Metro station",), fill_elements=("Park", "Water", "Grass")
        )
        layers = dict(dataset.layers)
        layers[layer_key("fill", "Grass")] = collection(feature(rect_polygon(0.1, 0.91, 0.2, 0.99)))
        drifted = build_dataset(bigger, layers, (0.0, 0.0, 1.0, 1.0))
        config = mllm_config(fixture, "drifted", replay=True)
        store = SessionStore(tmp_path / "runs-drifted")
        roles = build_roles(config, bigger)
        orchestrator = Orchestrator(inspiration, drifted, config, roles, store, "drifted")
        with pytest.raises(ReplayMiss):
            orchestrator.run()
        assert orchestrator.session.terminated_by == "error"
        assert store.read_index("drifted")["terminated_by"] == "error"


class TestSunflowersReplay:
    """Recorded run whose designer output is the six-line warm-palette sheet
    and whose reviewer pushes the background to the warm yellow."""

    LINE_URLS = dict(CHAT_URLS)

    def _inputs(self):
        from cartoforge.stylesheet import LayerManifest
        from helpers import sunflowers_lines_text

        manifest = LayerManifest(
            line_elements=("Pedestrian", "Street", "Tertiary_Road", "Secondary_Road", "Primary_Road", "Ferry")
        )
        layers = {
            layer_key("line", name): collection(
                feature({"type": "LineString", "coordinates": [[0.1, 0.1 * (i + 1)], [0.9, 0.1 * (i + 1)]]})
            )
            for i, name in enumerate(manifest.line_elements)
        }
        dataset = build_dataset(manifest, layers, (0.0, 0.0, 1.0, 1.0))
        revised = sunflowers_lines_text().replace("#b0c4de", "#faf3d3")
        transport = FakeTransport(
            {
                CHAT_URLS["appreciator"]: [(200, chat_body(CAPTION_TEXT))],
                CHAT_URLS["style_designer"]: [
                    (200, chat_body(sunflowers_lines_text())),
                    (200, chat_body(revised)),
                ],
                CHAT_URLS["reviewer"]: [
                    (200, chat_body(reviewer_revision("warm the canvas", "#faf3d3"))),
                    (200, chat_body(json.dumps({"decision": "Accept", "commentary": "", "suggestions": []}))),
                ],
            }
        )
        return dataset, transport

    def test_recorded_values_then_reviewer_suggestion(self, tmp_path):
        dataset, transport = self._inputs()
        inspiration = solid_png((250, 243, 211), 32, 32)
        fixture = tmp_path / "sunflowers.jsonl"
        config = mllm_config(fixture, "sunflowers", replay=False)
        store = SessionStore(tmp_path / "runs")
        roles = build_roles(config, dataset.manifest, transport=transport, sleep=lambda s: None)
        Orchestrator(inspiration, dataset, config, roles, store, "sunflowers").run()

        replay_config = mllm_config(fixture, "sunflowers", replay=True)
        replay_store = SessionStore(tmp_path / "replay")
        replay_roles = build_roles(replay_config, dataset.manifest)
        session = Orchestrator(
            inspiration, dataset, replay_config, replay_roles, replay_store, "sunflowers"
        ).run()

        assert session.terminated_by == "accept"
        first = session.iterations[0].stylesheet
        assert first.lines["Primary_Road"].line_color == "#8b0000"
        assert first.lines["Primary_Road"].line_opacity == 1.0
        assert first.lines["Ferry"].line_color == "#556b2f"
        later = session.iterations[1].stylesheet
        assert later.background.background_color == "#faf3d3"


class TestRunTransferEntryPoint:
    def test_scripted_designer_via_config(self, tmp_path):
        config = scripted_config("entry", reviewer_source="scripted")
        store = SessionStore(tmp_path)
        roles = scripted_roles(scenario_verdicts())
        session = run_transfer(scenario_collage(), scenario_dataset(), config, store, roles=roles)
        assert session.terminated_by == "accept"
        assert store.run_dir("entry").exists()

    def test_run_id_collision_gets_suffix(self, tmp_path):
        store = SessionStore(tmp_path)
        config = scripted_config(None)
        config.run_id = None
        roles = scripted_roles([ReviewVerdict("Accept")])
        s1 = run_transfer(scenario_collage(), scenario_dataset(), config, store, roles=roles)
        roles2 = scripted_roles([ReviewVerdict("Accept")])
        s2 = run_transfer(scenario_collage(), scenario_dataset(), config, store, roles=roles2)
        assert s1.run_id != s2.run_id
        assert s2.run_id.startswith(s1.run_id)
