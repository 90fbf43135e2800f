"""
Scripted pose-query episodes and their rewards
==============================================

Without a language model, scripted policies play the query-then-answer game.
Each trajectory is scored for accuracy, output format, tool use and spatial
grounding, then standardized within its group.
"""

import numpy as np

from bevground.episode import (NoToolPolicy, OraclePolicy, RandomPolicy, Task, format_reward, run_episode,
                               score_group, spatial_reward)
from bevground.grounding import FramePoseTable, GroundingParams
from bevground.scene import BevPose

table = FramePoseTable.from_entries([(i, BevPose(10 + 5 * i, 20, 30 * i)) for i in range(10)], cell_size=0.1)
p = GroundingParams()
task = Task("Which object is left of the sofa?", gold="B", gold_frame=4)

rng = np.random.default_rng(3)
group = [
    run_episode(OraclePolicy(task, table), table, task, p, episode_id="oracle"),
    run_episode(NoToolPolicy(task, table), table, task, p, episode_id="no-tool"),
    run_episode(RandomPolicy(task, table, rng), table, task, p, episode_id="random-1"),
    run_episode(RandomPolicy(task, table, rng), table, task, p, episode_id="random-2"),
]
rewards, adv = score_group(group)
for t, r, a in zip(group, rewards, adv):
    print(f"{t.episode_id:9s} calls={len(t.call_scores)} answer={t.answer} {r.to_dict()} advantage={a:+.3f}")

print(group[0].texts[0])

# one bad call or many: the spatial penalty is the same
print(spatial_reward(group[2], 0.5, 0.5), spatial_reward(group[3], 0.5, 0.5))
print(format_reward("<think>x</think><answer>B</answer>"), format_reward("<answer>B</answer>"))
