"""Steps per second on the standard synthetic scene.

Single-agent mode picks a random vehicle each step, builds its observation
and applies a random action. Multi-agent mode controls k vehicles at once;
per-step time should grow roughly linearly in k.
"""

from drivecone import bench, synth

scene = synth.corridor_scene()  # 30 vehicles, 16000 road points
single = bench.bench([scene], "single", repeats=3, seed=0)
print(f"single agent: {single.sps_mean:.0f} +/- {single.sps_std:.0f} steps per second")

crowd = synth.corridor_scene(n_vehicles=60, seed=7)
multi = bench.bench([crowd], "multi", repeats=1, seed=0, agent_counts=(1, 10, 20, 30, 40, 50))
for row in multi.curve:
    print(f"  {row['agents']:>2} agents: {1000 * row['step_seconds']:.2f} ms per step")
print(f"linear fit R^2 = {multi.to_dict()['linear_r2']:.3f}")
