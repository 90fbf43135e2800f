"""
From depth maps to a ground-aligned top-down grid
=================================================

Render a synthetic room, lift its depth maps into a point cloud, find the
floor and rasterize a bird's-eye view. Each frame gets a BEV pose (x, y, r).
"""

import math

import numpy as np

from bevground.grounding import FramePoseTable
from bevground.scene import align_to_ground, camera_to_bev_pose, fit_obb, pca_box_volume, rasterize_bev
from bevground.synthetic import make_room

room = make_room(n_frames=120, width=96, height=72, seed=4)
cloud = room.point_cloud(stride=4)
print(f"{len(cloud)} points from {len(room.poses)} frames")

obb = fit_obb(cloud)
print("box extents (m):", obb.extents.round(3))
print(f"box volume {obb.volume:.2f} vs PCA box {pca_box_volume(cloud):.2f}")

ground, aligned = align_to_ground(cloud, obb)
tilt = math.degrees(math.acos(np.clip((ground.rotation @ room.up)[2], -1, 1)))
print(f"recovered vertical is off by {tilt:.3f} deg; flipped: {ground.flipped}")

grid = rasterize_bev(aligned)
print(f"grid {grid.width} x {grid.height} cells of {grid.cell_size:.3f} m")
occupied = grid.occupancy > 0
print(f"{occupied.mean():.0%} of cells hold points; tallest cell {np.nanmax(grid.data[..., 2]):.2f} m")

bev = [camera_to_bev_pose(p, ground, grid) for p in room.poses]
table = FramePoseTable.from_entries(list(enumerate(bev)), grid.cell_size)
for i in (0, 30, 60, 90):
    b = bev[i]
    print(f"frame {i:3d}: x={b.x:6.1f} y={b.y:6.1f} r={b.r:6.1f}")

# headings turn with the camera; r grows counterclockwise on the image, so the sign may flip
dr = (bev[30].r - bev[0].r + 180) % 360 - 180
dyaw = (math.degrees(room.yaw[30] - room.yaw[0]) + 180) % 360 - 180
print(f"heading change {dr:.2f} deg, camera yaw change {dyaw:.2f} deg")
