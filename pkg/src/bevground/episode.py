"""LLM-free pose-query episodes, trajectory rewards and group-relative advantages."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .grounding import FramePoseTable, GroundingParams, QueryResult, retrieve
from .scene import BevPose

TOOL_NAME = "video_image_sample_tool"
MULTIPLE_CHOICE = "multiple-choice"
NUMERIC = "numeric"
MRA_THRESHOLDS = np.round(np.arange(0.50, 0.951, 0.05), 2)


class EpisodeStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class Query:
    pose: BevPose
    think: str = ""


@dataclass(frozen=True)
class Stop:
    answer: str
    think: str = ""


@dataclass
class EpisodeState:
    evidence: list = field(default_factory=list)
    query_buffer: list = field(default_factory=list)
    calls_made: int = 0
    terminated: bool = False
    capped: bool = False
    answer: str | None = None


@dataclass
class Step:
    action: Query | Stop
    result: QueryResult | None = None
    text: str = ""


@dataclass
class Trajectory:
    steps: list
    answer: str | None
    gold: str
    kind: str = MULTIPLE_CHOICE
    episode_id: str = "0"
    group_id: str = "0"

    @property
    def call_scores(self) -> list:
        return [s.result.score for s in self.steps if isinstance(s.action, Query)]

    @property
    def texts(self) -> list:
        return [s.text for s in self.steps]


@dataclass(frozen=True)
class RewardConfig:
    lambda_tool: float = 1.0
    lambda_spatial: float = 1.0
    alpha_s: float = 0.5
    theta_sim: float = 0.5


@dataclass(frozen=True)
class RewardBreakdown:
    acc: float
    format: float
    tool: float
    spatial: float
    lambda_tool: float
    lambda_spatial: float
    alpha_s: float
    theta_sim: float
    total: float

    def to_dict(self) -> dict:
        return {"acc": self.acc, "format": self.format, "tool": self.tool,
                "spatial": self.spatial, "total": self.total}


def render_turn(action) -> str:
    """Agent-authored text for one turn, in the prompt's output format."""
    if isinstance(action, Query):
        call = {"name": TOOL_NAME, "arguments": {"camera": [action.pose.x, action.pose.y, action.pose.r]}}
        return f"<think>{action.think}</think>\n<tool_call>\n{json.dumps(call)}\n</tool_call>"
    return f"<think>{action.think}</think> <answer>{action.answer}</answer>"


def step(state: EpisodeState, action, table: FramePoseTable, p: GroundingParams = GroundingParams()):
    """Advance one action. Returns ``(state, observation, result)``.

    The observation is the retrieved frame id on a Hit, an error string on a
    Miss, or ``"terminal"`` once the episode ends.
    """
    if state.terminated:
        raise EpisodeStateError("episode already terminated")
    if isinstance(action, Stop):
        state.terminated = True
        state.answer = action.answer
        return state, "terminal", None
    result = retrieve(action.pose, table, p)
    state.calls_made += 1
    if result.hit:
        if result.frame_id not in state.evidence:
            state.evidence.append(result.frame_id)
        state.query_buffer.append((action.pose, result))
        obs = result.frame_id
    else:
        obs = (f"Error: no recorded camera view near ({action.pose.x:.1f}, {action.pose.y:.1f}, "
               f"{action.pose.r:.0f}); best similarity {result.score:.3f} < {p.tau_s}")
    if state.calls_made >= p.t_max:
        state.terminated = True
        state.capped = True
    return state, obs, result


def spatial_reward(traj: Trajectory, theta_sim: float = 0.5, alpha_s: float = 0.5) -> float:
    """-alpha_s if any tool call's best similarity is below theta_sim, else 0."""
    if not alpha_s > 0:
        raise ValueError(f"alpha_s must be > 0, got {alpha_s}")
    return -alpha_s if any(s < theta_sim for s in traj.call_scores) else 0.0


_TAGS = ("think", "tool_call", "answer")
_TURN = re.compile(
    r"\s*<think>(?P<think>.*?)</think>\s*"
    r"(?:<tool_call>(?P<call>.*?)</tool_call>|<answer>(?P<answer>.*?)</answer>)\s*",
    re.DOTALL,
)
_ANY_TAG = re.compile(r"</?(?:%s)>" % "|".join(_TAGS))


def _valid_call(body: str) -> bool:
    try:
        call = json.loads(body)
    except ValueError:
        return False
    if not isinstance(call, dict) or not isinstance(call.get("name"), str):
        return False
    args = call.get("arguments")
    if not isinstance(args, dict):
        return False
    cam = args.get("camera")
    return (isinstance(cam, list) and len(cam) == 3
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in cam))


def turn_matches(text: str) -> bool:
    m = _TURN.fullmatch(text)
    if m is None:
        return False
    if any(_ANY_TAG.search(m.group(g) or "") for g in ("think", "call", "answer")):
        return False
    return m.group("call") is None or _valid_call(m.group("call"))


def format_reward(output) -> float:
    """1 when every emitted turn follows ``<think>..</think>`` + one tool call or answer block."""
    turns = [output] if isinstance(output, str) else list(output)
    if not turns:
        return 0.0
    return 1.0 if all(turn_matches(t) for t in turns) else 0.0


_LETTER = re.compile(r"\s*\(?([A-Za-z])(?![A-Za-z])")
_NUMBER = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


def accuracy_reward(answer, gold: str, kind: str = MULTIPLE_CHOICE) -> float:
    if not gold:
        raise ValueError("gold answer is empty")
    if answer is None:
        return 0.0
    if kind == MULTIPLE_CHOICE:
        a, g = _LETTER.match(answer), _LETTER.match(gold)
        return float(a is not None and g is not None and a.group(1).upper() == g.group(1).upper())
    if kind == NUMERIC:
        a, g = _NUMBER.search(answer), _NUMBER.search(gold)
        if a is None or g is None:
            return 0.0
        av, gv = float(a.group()), float(g.group())
        if not math.isfinite(av):
            return 0.0
        rel = abs(av - gv) / max(abs(gv), 1e-9)
        return float(np.mean(rel <= 1.0 - MRA_THRESHOLDS))
    raise ValueError(f"unknown answer kind {kind!r}")


def tool_reward(traj: Trajectory, acc: float | None = None) -> float:
    """1 for a correct answer supported by at least one successful tool call."""
    if acc is None:
        acc = accuracy_reward(traj.answer, traj.gold, traj.kind)
    hits = any(s.result is not None and s.result.hit for s in traj.steps)
    return 1.0 if hits and acc > 0 else 0.0


def total_reward(traj: Trajectory, cfg: RewardConfig = RewardConfig()) -> RewardBreakdown:
    acc = accuracy_reward(traj.answer, traj.gold, traj.kind)
    fmt = format_reward(traj.texts)
    tool = tool_reward(traj, acc)
    spatial = spatial_reward(traj, cfg.theta_sim, cfg.alpha_s)
    total = acc + fmt + cfg.lambda_tool * tool + cfg.lambda_spatial * spatial
    return RewardBreakdown(acc, fmt, tool, spatial, cfg.lambda_tool, cfg.lambda_spatial,
                           cfg.alpha_s, cfg.theta_sim, total)


def group_advantages(rewards, eps: float = 1e-8) -> np.ndarray:
    """(R - mean) / (population std + eps) within one prompt's rollout group."""
    r = np.asarray(rewards, dtype=float).reshape(-1)
    if r.size < 2:
        raise ValueError(f"group needs at least 2 rewards, got {r.size}")
    return (r - r.mean()) / (r.std() + eps)


# --- scripted policies ------------------------------------------------------

@dataclass(frozen=True)
class Task:
    question: str
    gold: str
    kind: str = MULTIPLE_CHOICE
    gold_frame: int | None = None
    options: tuple = ("A", "B", "C", "D")


class OraclePolicy:
    """Queries the gold frame's stored pose once, then answers the gold answer."""

    name = "oracle"

    def __init__(self, task: Task, table: FramePoseTable, rng=None):
        self.task, self.table = task, table

    def act(self, state: EpisodeState):
        if self.task.gold_frame is not None and state.calls_made == 0:
            return Query(self.table.pose(self.task.gold_frame), think="Check the view at the target location.")
        return Stop(self.task.gold, think="The retrieved view confirms the answer.")


class NoToolPolicy:
    """Answers immediately with the first option, never calling the tool."""

    name = "no-tool"

    def __init__(self, task: Task, table: FramePoseTable, rng=None):
        self.task = task

    def act(self, state: EpisodeState):
        return Stop(self.task.options[0], think="Answering from the initial frames.")


class RandomPolicy:
    """Uniform random queries over the grid extent, then a random option."""

    name = "random"

    def __init__(self, task: Task, table: FramePoseTable, rng, t_max: int = 6, width=None, height=None):
        self.task, self.rng = task, rng
        self.width = float(width if width is not None else table.xs.max() + 1)
        self.height = float(height if height is not None else table.ys.max() + 1)
        self.n_calls = int(rng.integers(0, t_max + 1))

    def act(self, state: EpisodeState):
        if state.calls_made < self.n_calls:
            x = round(float(self.rng.uniform(0, self.width)), 2)
            y = round(float(self.rng.uniform(0, self.height)), 2)
            r = round(float(self.rng.uniform(0, 360)), 1)
            return Query(BevPose(x, y, r), think="Probe a random viewpoint.")
        return Stop(self.task.options[int(self.rng.integers(len(self.task.options)))], think="Guess.")


POLICIES = {p.name: p for p in (OraclePolicy, NoToolPolicy, RandomPolicy)}


def run_episode(policy, table: FramePoseTable, task: Task, p: GroundingParams = GroundingParams(),
                episode_id: str = "0", group_id: str = "0") -> Trajectory:
    state = EpisodeState()
    steps = []
    while not state.terminated:
        action = policy.act(state)
        state, _, result = step(state, action, table, p)
        steps.append(Step(action, result, render_turn(action)))
    return Trajectory(steps=steps, answer=state.answer, gold=task.gold, kind=task.kind,
                      episode_id=episode_id, group_id=group_id)


# --- trajectory log records --------------------------------------------------

def _action_dict(a) -> dict:
    if isinstance(a, Query):
        return {"type": "query", "camera": [a.pose.x, a.pose.y, a.pose.r], "think": a.think}
    return {"type": "stop", "answer": a.answer, "think": a.think}


def trajectory_to_record(traj: Trajectory, rewards: RewardBreakdown | None = None,
                         advantage: float | None = None, config: dict | None = None) -> dict:
    rec = {
        "episode_id": traj.episode_id,
        "group_id": traj.group_id,
        "steps": [
            {"action": _action_dict(s.action),
             "result": s.result.to_dict() if s.result is not None else None,
             "score": s.result.score if s.result is not None else None,
             "text": s.text}
            for s in traj.steps
        ],
        "answer": traj.answer,
        "gold": traj.gold,
        "kind": traj.kind,
    }
    if rewards is not None:
        rec["rewards"] = rewards.to_dict()
    if advantage is not None:
        rec["advantages"] = advantage
    if config is not None:
        rec["config"] = config
    return rec


def trajectory_from_record(rec: dict) -> Trajectory:
    steps = []
    for s in rec["steps"]:
        a = s["action"]
        if a["type"] == "query":
            action = Query(BevPose(*a["camera"]), a.get("think", ""))
        else:
            action = Stop(a["answer"], a.get("think", ""))
        result = QueryResult.from_dict(s["result"]) if s.get("result") else None
        steps.append(Step(action, result, s.get("text", render_turn(action))))
    return Trajectory(steps=steps, answer=rec.get("answer"), gold=rec["gold"], kind=rec.get("kind", MULTIPLE_CHOICE),
                      episode_id=str(rec.get("episode_id", "0")), group_id=str(rec.get("group_id", "0")))


def score_group(trajs, cfg: RewardConfig = RewardConfig()):
    """Rewards for each trajectory plus group-relative advantages (None for singleton groups)."""
    breakdowns = [total_reward(t, cfg) for t in trajs]
    if len(trajs) < 2:
        return breakdowns, [None] * len(trajs)
    adv = group_advantages([b.total for b in breakdowns])
    return breakdowns, [float(a) for a in adv]


def duplicate_step(traj: Trajectory, index: int) -> Trajectory:
    """Copy of ``traj`` with step ``index`` repeated once (used for penalty idempotence checks)."""
    steps = list(traj.steps)
    steps.insert(index, steps[index])
    return replace(traj, steps=steps)
