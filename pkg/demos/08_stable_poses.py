"""Stable resting orientations by support-polygon analysis, and episode
initial/goal sampling.

Run:  python3 demos/08_stable_poses.py
"""
import numpy as np

from corn import shapes
from corn.geom import Aabb
from corn.poses import com_and_volume, sample_episode, stable_orientations

for name, mesh in (
    ("cube 6 cm", shapes.box((0.06, 0.06, 0.06))),
    ("book-like box", shapes.box((0.15, 0.10, 0.02))),
    ("wedge", shapes.wedge((0.1, 0.08, 0.05))),
    ("tall thin box", shapes.box((0.02, 0.02, 0.3))),
):
    com, vol = com_and_volume(mesh)
    found = stable_orientations(mesh, margin_min=0.002)
    print(f"{name}: volume {vol * 1e6:.0f} cm^3, {len(found)} stable classes")
    for p in found:
        print(f"    rest height {p.rest_height * 100:5.2f} cm, margin {p.margin * 1000:5.1f} mm")

print("\nwith a 12 mm margin requirement the tall thin box has no stable pose:")
print("  classes:", len(stable_orientations(shapes.box((0.02, 0.02, 0.3)), margin_min=0.012)))

mesh = shapes.box((0.06, 0.05, 0.04))
stable = stable_orientations(mesh, margin_min=0.002)
rng = np.random.default_rng(0)
workspace = Aabb((-0.25, -0.25, 0.0), (0.25, 0.25, 0.5))
print("\nepisodes (initial -> goal, planar separation >= 0.1 m):")
for _ in range(3):
    ep = sample_episode(stable, workspace, rng)
    d = np.hypot(ep.goal.translation[0] - ep.initial.translation[0],
                 ep.goal.translation[1] - ep.initial.translation[1])
    print(f"  {np.round(ep.initial.translation, 3)} -> {np.round(ep.goal.translation, 3)}"
          f"  (separation {d:.3f} m)")
