"""
Asking for a view by BEV pose
=============================

A query (x, y, r) is scored against every stored frame pose. The best frame
comes back when its similarity clears the threshold; otherwise the caller
gets a miss carrying the best score.
"""

import math

from bevground.grounding import FramePoseTable, GroundingParams, bev_similarity, parse_camera, retrieve
from bevground.scene import BevPose, heading_direction

# stored frames on a 0.05 m grid
table = FramePoseTable.from_entries([
    (0, BevPose(40, 40, 0)),
    (1, BevPose(60, 40, 90)),
    (2, BevPose(60, 70, 180)),
    (3, BevPose(30, 70, 270)),
], cell_size=0.05)
p = GroundingParams(sigma_p=1.0, beta=2.0, tau_s=0.5)

# r=0 faces up the image, 90 left, 180 down, 270 right
for r in (0, 90, 180, 270):
    print(r, heading_direction(r).round(6))

print(retrieve(BevPose(61, 42, 85), table, p))
print(retrieve(BevPose(61, 42, 200), table, p).to_dict())

# the tool-call argument shape is accepted directly
call = '{"name": "video_image_sample_tool", "arguments": {"camera": [58, 68, 175]}}'
print(retrieve(parse_camera(call), table, p).to_dict())

# angles wrap: 350 vs 10 is a 20 degree gap
a = bev_similarity(BevPose(0, 0, 350), BevPose(0, 0, 10), p)
print(a, math.exp(-0.5 * 4 * math.radians(20) ** 2))
