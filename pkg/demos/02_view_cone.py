"""What a driver sees, and what a wall of traffic hides.

A truck parked across the road blocks the ego's view of the car behind it.
Turning the head shifts the cone; stop signs stay visible through traffic.
Two frames are written next to this script so the effect can be eyeballed.
"""

import math
from pathlib import Path

import numpy as np

from drivecone.obs import Goal, build_observation, rasterize, save_png
from drivecone.visibility import visible_set
from drivecone.world import RoadMap, World

# lane center along x, one stop sign just behind the truck
xs = np.arange(0.0, 100.0, 0.5)
road = RoadMap.from_points(np.column_stack([xs, np.zeros_like(xs)]), stop_signs=np.array([[30.0, 2.0]]))

# ego at the origin, a 12 m truck across the lane at x=20, a car behind it, a car off to the left
pos = np.array([[0.0, 0.0], [20.0, 0.0], [40.0, 0.0], [15.0, 25.0]])
heading = np.array([0.0, math.pi / 2, 0.0, 0.0])
world = World.from_arrays(road, pos, heading, length=np.array([4.5, 12.0, 4.5, 4.5]),
                          width=np.array([2.0, 2.5, 2.0, 2.0]))

for tilt in (0.0, math.pi / 2):
    seen = visible_set(0, tilt, world)
    print(f"tilt {tilt:+.2f} rad: objects {seen.objects.tolist()}, "
          f"{len(seen.road_points)} road points, stop signs {seen.stop_signs.tolist()}")

obs = build_observation(0, 0.0, world, Goal(90.0, 0.0, 5.0, 0.0))
print(f"observation: {obs.vector.size} numbers, {int(obs.mask.sum())} filled slots of {obs.mask.size}")

here = Path(__file__).parent
save_png(rasterize(0, world, px=200, meters_per_px=0.5), here / "view_cone.png")
save_png(rasterize(0, world, px=200, meters_per_px=0.5, view="full"), here / "view_full.png")
print("wrote view_cone.png and view_full.png")
