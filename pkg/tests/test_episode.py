import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bevground.episode import (
    NUMERIC,
    EpisodeState,
    EpisodeStateError,
    NoToolPolicy,
    OraclePolicy,
    Query,
    RandomPolicy,
    RewardConfig,
    Step,
    Stop,
    Task,
    Trajectory,
    accuracy_reward,
    duplicate_step,
    format_reward,
    group_advantages,
    render_turn,
    run_episode,
    spatial_reward,
    step,
    tool_reward,
    total_reward,
    trajectory_from_record,
    trajectory_to_record,
)
from bevground.grounding import FramePoseTable, GroundingParams, QueryResult
from bevground.scene import BevPose

P = GroundingParams()
TABLE = FramePoseTable.from_entries([(0, BevPose(10, 10, 0)), (1, BevPose(20, 10, 90)), (2, BevPose(30, 15, 180))])
HIT_POSE = BevPose(20, 10, 90)
FAR_POSE = BevPose(500, 500, 0)

PROMPT_TOOL_EXAMPLE = ('<think>...</think>\n<tool_call> \n'
                       '{"name": "video_image_sample_tool", "arguments": {"camera": [100, 200, 145]}} \n'
                       '</tool_call>')
PROMPT_ANSWER_EXAMPLE = "<think>...</think> <answer>...</answer>"


def hit(score=1.0, fid=1):
    return QueryResult(True, fid, score)


def miss(score=0.3, fid=0):
    return QueryResult(False, fid, score)


def traj(results, answer="A", gold="A", kind="multiple-choice"):
    steps = [Step(Query(HIT_POSE, "t"), r, render_turn(Query(HIT_POSE, "t"))) for r in results]
    steps.append(Step(Stop(answer, "t"), None, render_turn(Stop(answer, "t"))))
    return Trajectory(steps, answer, gold, kind)


class TestStep:
    def test_stop_on_fresh_state(self):
        s, obs, res = step(EpisodeState(), Stop("A"), TABLE, P)
        assert s.terminated and s.calls_made == 0 and s.answer == "A" and res is None and obs == "terminal"

    def test_hit_grows_evidence(self):
        s, obs, res = step(EpisodeState(), Query(HIT_POSE), TABLE, P)
        assert s.evidence == [1] and obs == 1 and res.hit and len(s.query_buffer) == 1

    def test_miss_reports_error(self):
        s, obs, res = step(EpisodeState(), Query(FAR_POSE), TABLE, P)
        assert s.evidence == [] and isinstance(obs, str) and obs.startswith("Error") and not res.hit
        assert s.calls_made == 1 and not s.terminated

    def test_cap(self):
        s = EpisodeState()
        for i in range(6):
            assert not s.terminated
            s, _, _ = step(s, Query(FAR_POSE if i % 2 else HIT_POSE), TABLE, P)
        assert s.terminated and s.capped and s.calls_made == 6
        with pytest.raises(EpisodeStateError):
            step(s, Stop("A"), TABLE, P)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 8))
    def test_calls_never_exceed_cap(self, seed, t_max):
        p = GroundingParams(t_max=t_max)
        rng = np.random.default_rng(seed)
        s = EpisodeState()
        while not s.terminated:
            a = Stop("A") if rng.random() < 0.1 else Query(BevPose(*rng.uniform(0, 40, 3)))
            s, _, _ = step(s, a, TABLE, p)
            assert s.calls_made <= t_max
        assert s.answer is not None or s.capped


class TestSpatialReward:
    def test_no_calls(self):
        assert spatial_reward(traj([]), 0.5, 0.5) == 0.0

    def test_one_failing(self):
        assert spatial_reward(traj([miss(0.3)]), 0.5, 0.5) == -0.5

    def test_three_failing(self):
        assert spatial_reward(traj([miss(0.3), miss(0.1), miss(0.2)]), 0.5, 0.5) == -0.5

    def test_all_good(self):
        assert spatial_reward(traj([hit(0.9), hit(0.5)]), 0.5, 0.5) == 0.0

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            spatial_reward(traj([]), 0.5, 0.0)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=8), st.data())
    def test_idempotent_under_duplication(self, scores, data):
        t = traj([QueryResult(s >= 0.5, 0, s) for s in scores])
        failing = [i for i, s in enumerate(scores) if s < 0.5]
        base = spatial_reward(t, 0.5, 0.5)
        if failing:
            i = data.draw(st.sampled_from(failing))
            t2 = duplicate_step(t, i)
            assert len(t2.call_scores) == len(t.call_scores) + 1
            assert spatial_reward(t2, 0.5, 0.5) == base == -0.5


class TestFormat:
    def test_answer_turn(self):
        assert format_reward("<think>x</think><answer>A</answer>") == 1.0

    def test_missing_think(self):
        assert format_reward("<answer>A</answer>") == 0.0

    def test_tool_call_example(self):
        text = ('<think>x</think><tool_call>{"name":"video_image_sample_tool",'
                '"arguments":{"camera":[100,200,145]}}</tool_call>')
        assert format_reward(text) == 1.0

    def test_prompt_examples(self):
        assert format_reward(PROMPT_ANSWER_EXAMPLE) == 1.0
        assert format_reward(PROMPT_TOOL_EXAMPLE) == 1.0

    @pytest.mark.parametrize("text", [
        "<think>x</think>",
        "<think>x</think><answer>A</answer><answer>B</answer>",
        "<think>x</think><tool_call>{}</tool_call><answer>A</answer>",
        "<think>x</think><tool_call>not json</tool_call>",
        '<think>x</think><tool_call>{"name":"t","arguments":{"camera":[1,2]}}</tool_call>',
        '<think>x</think><tool_call>{"name":"t","arguments":{"camera":[1,2,true]}}</tool_call>',
        "<think>a<answer>b</answer></think><answer>A</answer>",
        "junk <think>x</think><answer>A</answer>",
        "",
    ])
    def test_rejected(self, text):
        assert format_reward(text) == 0.0

    @pytest.mark.parametrize("text", [PROMPT_ANSWER_EXAMPLE, PROMPT_TOOL_EXAMPLE,
                                      render_turn(Query(BevPose(1.5, 2, 3), "look"))])
    def test_single_character_tag_corruptions(self, text):
        tag_chars = [i for m in re.finditer(r"</?[a-z_]+>", text) for i in range(m.start(), m.end())]
        for i in tag_chars:
            for rep in ("", "x", "<", ">", "/"):
                if text[i] == rep:
                    continue
                corrupted = text[:i] + rep + text[i + 1:]
                assert format_reward(corrupted) == 0.0, corrupted

    def test_trajectory_all_turns(self):
        assert format_reward(["<think>a</think><answer>A</answer>"] * 2) == 1.0
        assert format_reward(["<think>a</think><answer>A</answer>", "<answer>A</answer>"]) == 0.0
        assert format_reward([]) == 0.0


class TestAccuracy:
    def test_multiple_choice(self):
        assert accuracy_reward("B", "b") == 1.0
        assert accuracy_reward("(C) the chair", "C") == 1.0
        assert accuracy_reward("A", "B") == 0.0
        assert accuracy_reward(None, "B") == 0.0

    def test_numeric(self):
        assert accuracy_reward("4", "4", NUMERIC) == 1.0
        assert accuracy_reward("8", "4", NUMERIC) == 0.0
        assert accuracy_reward("about 3.5 meters", "4", NUMERIC) == pytest.approx(0.8)
        assert accuracy_reward("three", "4", NUMERIC) == 0.0

    def test_numeric_oracle(self, rng):
        for _ in range(200):
            g = float(rng.uniform(0.5, 20))
            a = g * (1 + rng.uniform(-1, 1))
            rel = abs(a - g) / g
            expected = sum(rel <= 1 - d for d in [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95]) / 10
            assert accuracy_reward(repr(a), repr(g), NUMERIC) == pytest.approx(expected)

    def test_errors(self):
        with pytest.raises(ValueError):
            accuracy_reward("A", "")
        with pytest.raises(ValueError):
            accuracy_reward("A", "A", "essay")


class TestToolAndTotal:
    def test_tool(self):
        assert tool_reward(traj([hit()])) == 1.0
        assert tool_reward(traj([])) == 0.0
        assert tool_reward(traj([hit(), hit()], answer="B")) == 0.0
        assert tool_reward(traj([miss()])) == 0.0

    def test_perfect(self):
        b = total_reward(traj([hit()]))
        assert (b.acc, b.format, b.tool, b.spatial, b.total) == (1.0, 1.0, 1.0, 0.0, 3.0)

    def test_zero_with_failing_call(self):
        t = traj([miss(0.3)], answer="B")
        t.steps[0].text = "garbage"
        b = total_reward(t)
        assert (b.acc, b.format, b.tool, b.spatial, b.total) == (0.0, 0.0, 0.0, -0.5, -0.5)

    def test_zero_weights(self):
        b = total_reward(traj([miss(0.3), hit()]), RewardConfig(lambda_tool=0.0, lambda_spatial=0.0))
        assert b.total == b.acc + b.format == 2.0

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0, 1), max_size=6), st.sampled_from("ABCD"),
           st.floats(0, 3), st.floats(0, 3), st.floats(0.01, 2), st.floats(0.01, 1))
    def test_decomposition(self, scores, ans, lt, ls, a, th):
        cfg = RewardConfig(lt, ls, a, th)
        b = total_reward(traj([QueryResult(s >= 0.5, 0, s) for s in scores], answer=ans), cfg)
        assert abs(b.total - (b.acc + b.format + lt * b.tool + ls * b.spatial)) <= 1e-12
        assert b.spatial in (0.0, -a)


class TestAdvantages:
    def test_two_point(self):
        np.testing.assert_allclose(group_advantages([1, 0]), [1, -1], atol=1e-7)

    def test_constant(self):
        np.testing.assert_allclose(group_advantages([2.0] * 5), 0.0, atol=1e-12)

    def test_random(self, rng):
        for _ in range(50):
            r = rng.normal(size=int(rng.integers(2, 64))) * rng.uniform(0.1, 5)
            a = group_advantages(r)
            assert abs(a.sum()) <= 1e-9
            mean = sum(r) / len(r)
            std = (sum((x - mean) ** 2 for x in r) / len(r)) ** 0.5
            np.testing.assert_allclose(a, [(x - mean) / (std + 1e-8) for x in r], rtol=1e-9, atol=1e-12)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=64))
    def test_sums_to_zero(self, r):
        assert abs(group_advantages(r).sum()) <= 1e-9

    def test_too_small(self):
        with pytest.raises(ValueError):
            group_advantages([1.0])


class TestPolicies:
    def test_oracle(self):
        task = Task("q", "C", gold_frame=2)
        t = run_episode(OraclePolicy(task, TABLE), TABLE, task, P)
        assert total_reward(t).total == 3.0
        assert t.call_scores == [1.0]

    def test_no_tool_wrong(self):
        task = Task("q", "C")
        b = total_reward(run_episode(NoToolPolicy(task, TABLE), TABLE, task, P))
        assert (b.acc, b.tool, b.spatial, b.total) == (0.0, 0.0, 0.0, b.format) and b.format == 1.0

    def test_random_seeded(self):
        task = Task("q", "C")
        runs = [trajectory_to_record(run_episode(RandomPolicy(task, TABLE, np.random.default_rng(9)), TABLE, task, P))
                for _ in range(2)]
        assert runs[0] == runs[1]

    def test_record_round_trip(self):
        task = Task("q", "B", gold_frame=0)
        t = run_episode(OraclePolicy(task, TABLE), TABLE, task, P)
        rec = trajectory_to_record(t, total_reward(t))
        back = trajectory_from_record(rec)
        assert trajectory_to_record(back, total_reward(back)) == rec
