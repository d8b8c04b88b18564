"""Replay a scene, then let a random driver take the wheel.

We build a small two-corridor scene, replay every vehicle from its recorded
trajectory and confirm the metrics come out perfect. Then we hand the same
vehicles to a random policy and watch goal and collision rates move.
"""

from drivecone import synth
from drivecone.metrics import episode_report
from drivecone.sim import RandomPolicy, ReplayPolicy, Runner, SimConfig, Simulation

scene = synth.corridor_scene(n_vehicles=12, n_points=4000, seed=1, n_corridors=2, length=300.0)
print(f"scene {scene.name}: {len(scene.objects)} vehicles, {sum(len(r.points) for r in scene.roads)} road points")

# Removal off, so every vehicle stays on the map and ADE/FDE cover all 80 control steps.
keep_all = SimConfig(remove_on_goal=False, remove_on_collision=False)
sim = Simulation(scene, config=keep_all)
Runner({oid: ReplayPolicy() for oid in sim.controlled_ids}).rollout(sim, seed=0)
agg = episode_report(sim, "replay").aggregate()
print(f"replay: goal rate {agg['goal_rate']:.0%}, ADE {agg['ade']}, FDE {agg['fde']}")

# Same vehicles, random actions from the default 6 x 21 x 5 grid, benchmark removal rules.
sim = Simulation(scene)
Runner({oid: RandomPolicy(seed=oid) for oid in sim.controlled_ids}).rollout(sim, seed=0)
rep = episode_report(sim, "random", seed=0)
agg = rep.aggregate()
print(f"random: goal rate {agg['goal_rate']:.0%}, collision rate {agg['collision_rate']:.0%} "
      f"(vehicle {agg['vehicle_collision_rate']:.0%}, road edge {agg['road_edge_collision_rate']:.0%})")
for v in rep.vehicles[:4]:
    print(f"  vehicle {v.id}: collision={v.collision} goal={v.goal}")
