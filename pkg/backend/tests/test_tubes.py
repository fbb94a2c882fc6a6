"""
Tube Linking Tests
Matching, extrapolation, box prediction, label update and spawning.
"""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from app.core.config import LinkerConfig
from app.core.errors import InputError
from app.models.detection import Box, Detection
from app.models.tube import ActionTube
from app.schemas.scenario import Actor, NoiseParams, Occlusion, Scenario
from app.services.oracles import _naive_nms, oracle_link
from app.services.simulation import synth_detections
from app.services.tubes import (
    TubeLinker,
    iter_stream,
    link_videos,
    predict_bbox,
    run_stream,
    trim_extrapolated,
    update_label,
)
from tests.conftest import make_det


def static_actor_stream(gap: int, num_frames: int = 30, gap_start: int = 10):
    """Noiseless detections of one static actor hidden for ``gap`` frames"""
    occlusions = [Occlusion(actor=0, start=gap_start, end=gap_start + gap - 1)] if gap else []
    scenario = Scenario(
        num_frames=num_frames,
        width=64,
        height=64,
        num_classes=2,
        actors=[Actor(label=0, start=0, end=num_frames - 1, size=(16, 16), origin=(20, 20))],
        occlusions=occlusions,
    )
    return synth_detections(scenario, NoiseParams(), seed=1)


def random_stream(seed: int, num_frames: int = 12, num_classes: int = 2):
    """Detections clustered on a small canvas so tubes compete for them"""
    rng = np.random.default_rng(seed)
    frames = {}
    for t in range(num_frames):
        dets = []
        for _ in range(int(rng.integers(0, 6))):
            x, y = rng.uniform(0, 30, 2)
            w, h = rng.uniform(8, 20, 2)
            scores = tuple(float(s) for s in rng.uniform(0, 1, num_classes))
            dets.append(Detection(Box(float(x), float(y), float(x + w), float(y + h)), scores, t))
        frames[t] = dets
    return frames


# =============================================================================
# PRIMITIVES
# =============================================================================

class TestPredictBbox:
    """Test constant-velocity box prediction"""

    def test_zero_velocity(self):
        box = Box(3, 4, 13, 14)
        assert predict_bbox(box, box) == box

    def test_constant_velocity(self):
        """Test (0,0,10,10) then (5,0,15,10) predicts (10,0,20,10)"""
        assert predict_bbox(Box(5, 0, 15, 10), Box(0, 0, 10, 10)) == Box(10, 0, 20, 10)

    def test_no_history_holds(self):
        box = Box(1, 1, 5, 5)
        assert predict_bbox(box, None) == box

    def test_clamped_to_frame(self):
        assert predict_bbox(Box(50, 0, 60, 10), Box(45, 0, 55, 10), 62, 40) == Box(55, 0, 62, 10)

    def test_degenerate_prediction_holds(self):
        """Test a shrinking box that would invert keeps the last box"""
        prev = Box(10, 10, 12, 12)
        assert predict_bbox(prev, Box(0, 0, 20, 20)) == prev

    @given(st.integers(min_value=0, max_value=100_000))
    def test_matches_corner_arithmetic(self, seed):
        """Test corners equal 2 prev - prev2, clamped to a 256x256 frame"""
        rng = np.random.default_rng(seed)
        boxes = []
        for _ in range(2):
            x1, y1 = rng.uniform(0, 200, 2)
            w, h = rng.uniform(1, 56, 2)
            boxes.append(Box(float(x1), float(y1), float(x1 + w), float(y1 + h)))
        prev2, prev = boxes
        raw = [2 * p - q for p, q in zip(prev.as_list(), prev2.as_list())]
        expected = Box(*[min(max(v, 0.0), 256.0) for v in raw])
        if not (expected.x1 <= expected.x2 and expected.y1 <= expected.y2):
            expected = prev
        assert predict_bbox(prev, prev2, 256, 256) == expected


class TestUpdateLabel:
    """Test class-energy accumulation"""

    def test_first_detection(self):
        tube = ActionTube(id=0)
        assert update_label(tube, (0.1, 0.9)) == (0.9, 1)

    def test_two_detections(self):
        """Test (0.9, 0.1) then (0.2, 0.8) gives energy (1.1, 0.9), class 0, score 0.55"""
        tube = ActionTube(id=0)
        update_label(tube, (0.9, 0.1))
        score, label = update_label(tube, (0.2, 0.8))
        assert label == 0
        assert score == pytest.approx(0.55)
        assert tube.class_energy == pytest.approx([1.1, 0.9])

    def test_uniform_scores_pick_lowest_class(self):
        tube = ActionTube(id=0)
        for _ in range(4):
            score, label = update_label(tube, (0.25, 0.25, 0.25, 0.25))
            assert (score, label) == (pytest.approx(0.25), 0)

    def test_length_mismatch(self):
        tube = ActionTube(id=0)
        update_label(tube, (0.5, 0.5))
        with pytest.raises(InputError):
            update_label(tube, (1.0,))


# =============================================================================
# LINKER
# =============================================================================

class TestLinkerStep:
    """Test single linking steps"""

    def test_greedy_match_and_spawn(self, linker_config):
        """Test D1 (IoU 81/119) extends the tube and disjoint D2 spawns a new one"""
        linker = TubeLinker(linker_config)
        linker.step(0, [make_det((0, 0, 10, 10), (0.9,), 0)])
        d1 = make_det((1, 1, 11, 11), (0.8,), 1)
        d2 = make_det((20, 20, 30, 30), (0.9,), 1)
        live = linker.step(1, [d1, d2])

        assert [tb.id for tb in live] == [0, 1]
        assert live[0].last_box == d1.box
        assert live[1].last_box == d2.box
        assert len(live[1]) == 1

    def test_highest_class_score_wins(self, linker_config):
        """Test a tube takes the overlapping detection best for its class"""
        linker = TubeLinker(linker_config)
        linker.step(0, [make_det((0, 0, 10, 10), (0.9, 0.1), 0)])
        weak = make_det((0, 0, 10, 10), (0.3, 0.1), 1)
        strong = make_det((1, 0, 11, 10), (0.7, 0.2), 1)
        (tube,) = linker.step(1, [weak, strong])[:1]
        assert tube.last_box == strong.box

    def test_stronger_tube_claims_first(self, linker_config):
        """Test tubes are served by descending score"""
        linker = TubeLinker(linker_config)
        linker.step(0, [make_det((0, 0, 10, 10), (0.6,), 0), make_det((30, 0, 40, 10), (0.9,), 0)])
        shared = make_det((15, 0, 25, 10), (0.8,), 1)
        config = linker_config.model_copy(update={"lambda_": 0.0})
        linker.config = config
        live = linker.step(1, [shared])
        by_id = {tb.id: tb for tb in live}
        # spawn order follows NMS order, so the 0.9 tube has id 0
        assert by_id[0].last_box == shared.box
        assert by_id[1].entries[-1].extrapolated

    def test_extrapolation_holds_box(self, linker_config):
        """Test an unmatched tube repeats its box, flagged, and tau becomes 1"""
        linker = TubeLinker(linker_config)
        linker.step(0, [make_det((0, 0, 10, 10), (0.9,), 0)])
        (tube,) = linker.step(1, [])
        assert tube.entries[-1].extrapolated
        assert tube.last_box == Box(0, 0, 10, 10)
        assert tube.tau == 1

    def test_survives_exactly_k_frames(self):
        """Test k extrapolations are allowed and the next miss terminates"""
        config = LinkerConfig(k=3)
        linker = TubeLinker(config)
        linker.step(0, [make_det((0, 0, 10, 10), (0.9,), 0)])
        for t in range(1, 4):
            assert len(linker.step(t, [])) == 1
        assert linker.step(4, []) == []
        (tube,) = linker.finalize()
        assert [e.t for e in tube.entries] == [0]

    def test_extrapolation_disabled(self):
        linker = TubeLinker(LinkerConfig(explt=False))
        linker.step(0, [make_det((0, 0, 10, 10), (0.9,), 0)])
        assert linker.step(1, []) == []

    def test_box_prediction(self):
        """Test extrapolated boxes follow the last displacement when enabled"""
        linker = TubeLinker(LinkerConfig(boxp=True))
        linker.step(0, [make_det((0, 0, 10, 10), (0.9,), 0)])
        linker.step(1, [make_det((2, 0, 12, 10), (0.9,), 1)])
        (tube,) = linker.step(2, [])
        assert tube.last_box == Box(4, 0, 14, 10)
        (tube,) = linker.step(3, [])
        assert tube.last_box == Box(6, 0, 16, 10)

    def test_out_of_order_frame(self, linker_config):
        linker = TubeLinker(linker_config)
        linker.step(3, [])
        with pytest.raises(InputError):
            linker.step(3, [])

    def test_frame_index_mismatch(self, linker_config):
        linker = TubeLinker(linker_config)
        with pytest.raises(InputError):
            linker.step(0, [make_det((0, 0, 1, 1), (0.5,), frame=2)])

    def test_skipped_frames_extrapolate(self, linker_config):
        """Test frames missing between two steps count as empty frames"""
        linker = TubeLinker(linker_config)
        linker.step(0, [make_det((0, 0, 10, 10), (0.9,), 0)])
        (tube,) = linker.step(3, [make_det((0, 0, 10, 10), (0.9,), 3)])
        assert [e.extrapolated for e in tube.entries] == [False, True, True, False]


class TestSpawn:
    """Test tube initialization"""

    def test_first_frame_detection(self, linker_config):
        linker = TubeLinker(linker_config)
        assert len(linker.step(0, [make_det((0, 0, 10, 10), (0.5, 0.2), 0)])) == 1

    def test_identical_detections_collapse(self, linker_config):
        """Test five identical overlapping detections open a single tube"""
        linker = TubeLinker(linker_config)
        dets = [make_det((5, 5, 25, 25), (0.9 - 0.1 * i,), 0) for i in range(5)]
        assert len(linker.step(0, dets)) == 1

    def test_spawn_floor(self):
        linker = TubeLinker(LinkerConfig(spawn_floor=0.5))
        assert linker.step(0, [make_det((0, 0, 10, 10), (0.4,), 0)]) == []

    @pytest.mark.parametrize("seed", range(4))
    def test_per_class_cap(self, seed):
        """Test at most n tubes per class, as many as greedy NMS keeps"""
        rng = np.random.default_rng(seed)
        dets = []
        for _ in range(25):
            x, y = rng.uniform(0, 60, 2)
            dets.append(make_det((x, y, x + 15, y + 15), (float(rng.uniform(0.1, 1.0)),), 0))
        config = LinkerConfig(n=10)
        tubes = TubeLinker(config).step(0, dets)
        assert len(tubes) <= 10
        assert len(tubes) == len(_naive_nms(dets, 0, config.nms_iou, config.n))

    def test_ids_increase(self, linker_config):
        linker = TubeLinker(linker_config)
        linker.step(0, [make_det((0, 0, 10, 10), (0.9,), 0)])
        linker.step(1, [make_det((0, 0, 10, 10), (0.9,), 1), make_det((40, 40, 50, 50), (0.8,), 1)])
        assert [tb.id for tb in linker.finalize()] == [0, 1]


# =============================================================================
# STREAMS
# =============================================================================

class TestRunStream:
    """Test whole-video linking"""

    def test_noiseless_single_tube(self, linker_config):
        """Test a clean 30-frame actor gives one tube with 30 matched boxes"""
        (tube,) = run_stream(static_actor_stream(gap=0), linker_config)
        assert len(tube) == 30
        assert tube.matched_count == 30
        assert not any(e.extrapolated for e in tube.entries)

    @pytest.mark.parametrize("gap", range(7))
    @pytest.mark.parametrize("k", range(7))
    def test_gap_against_k(self, gap, k):
        """Test a detection gap of g frames is bridged iff g <= k"""
        tubes = run_stream(static_actor_stream(gap=gap), LinkerConfig(k=k))
        assert len(tubes) == (1 if gap <= k else 2)

    def test_bridged_gap_is_flagged(self):
        (tube,) = run_stream(static_actor_stream(gap=3), LinkerConfig(k=5))
        flagged = [e.t for e in tube.entries if e.extrapolated]
        assert flagged == [10, 11, 12]
        assert tube.matched_count == 27

    def test_fragmented_tube_is_trimmed(self):
        first, second = run_stream(static_actor_stream(gap=3), LinkerConfig(k=2))
        assert first.end == 9
        assert second.start == 13

    def test_online_snapshots_only_use_the_past(self, linker_config):
        """Test the snapshot after frame t equals linking frames 0..t alone"""
        frames = random_stream(3)
        for t, snapshot in iter_stream(frames, linker_config):
            prefix = {i: frames[i] for i in range(t + 1)}
            assert snapshot == run_stream(prefix, linker_config)

    def test_pairs_are_accepted(self, linker_config):
        frames = random_stream(4)
        assert run_stream(list(frames.items()), linker_config) == run_stream(frames, linker_config)

    def test_videos_are_independent(self, linker_config):
        frames = static_actor_stream(gap=0, num_frames=5)
        tubes = link_videos({"b": frames, "a": frames}, linker_config)
        assert [(tb.video, tb.id) for tb in tubes] == [("a", 0), ("b", 0)]

    def test_trim_extrapolated(self, linker_config):
        linker = TubeLinker(linker_config)
        linker.step(0, [make_det((0, 0, 10, 10), (0.9,), 0)])
        linker.step(1, [])
        (tube,) = linker.live
        assert len(trim_extrapolated(tube.copy())) == 1


class TestOracleEquivalence:
    """Test the linker against an exhaustive-scan reimplementation"""

    @given(
        seed=st.integers(min_value=0, max_value=1_000_000),
        lambda_=st.sampled_from([0.1, 0.3, 0.5]),
        k=st.sampled_from([0, 1, 2, 3, 5]),
        explt=st.booleans(),
        boxp=st.booleans(),
        bounded=st.booleans(),
    )
    def test_identical_tubes(self, seed, lambda_, k, explt, boxp, bounded):
        config = LinkerConfig(
            **{"lambda": lambda_, "k": k, "explt": explt, "boxp": boxp},
            frame_width=40.0 if bounded else None,
            frame_height=40.0 if bounded else None,
        )
        frames = random_stream(seed)
        assert run_stream(frames, config) == oracle_link(frames, config)
