"""Tour of the geometric core: meshes, containment, sampling, displacement.

Run:  python3 demos/01_geometry_queries.py
"""
import numpy as np

from corn import shapes
from corn.geom import (
    Pose,
    Rotation,
    nearest_displacement,
    nearest_point_on_mesh,
    point_in_mesh,
    points_in_mesh,
    sample_surface_points,
)

rng = np.random.default_rng(0)

cube = shapes.box((1.0, 1.0, 1.0))
print(f"unit cube: {len(cube)} faces, watertight={cube.watertight}")
print("  (0,0,0) inside?      ", point_in_mesh((0, 0, 0), cube))
print("  (0.6,0,0) inside?    ", point_in_mesh((0.6, 0, 0), cube))

p, d = nearest_point_on_mesh((0, 0, 2.0), cube)
print(f"  nearest surface point to (0,0,2): {p} at distance {d:.3f} m")

cloud = sample_surface_points(cube, 2000, rng)
on_face = np.isclose(np.abs(cloud.points).max(axis=1), 0.5, atol=1e-9)
print(f"  sampled {len(cloud)} surface points, all on faces: {on_face.all()}")

# containment is exact for awkward poses too
sphere = shapes.icosphere(0.5, 2)
pose = Pose(rng.normal(size=3), Rotation.from_axis_angle(rng.normal(size=3)))
moved = sphere.transformed(pose)
queries = pose.apply(rng.uniform(-0.7, 0.7, size=(5000, 3)))
inside = points_in_mesh(queries, moved)
print(f"icosphere at a random pose: {inside.sum()} of {len(queries)} probes inside")

# nearest displacement between two separated bodies
a = shapes.box((0.1, 0.1, 0.1))
b = shapes.icosphere(0.06, 2, center=(0.3, 0.05, 0.0))
delta = nearest_displacement(a, b, 4096, rng)
print(f"displacement from box toward sphere: {np.round(delta, 4)} (|delta|={np.linalg.norm(delta):.4f} m)")
print("translating the sphere by -delta brings the surfaces into contact:")
touched = b.translated(-delta)
print(f"  residual gap: {np.linalg.norm(nearest_displacement(a, touched, 4096, rng)):.2e} m")
