"""Reward anatomy over a synthetic approach trajectory: potential shaping,
success bonus, and energy cost.

Run:  python3 demos/06_reward_shaping.py
"""
import numpy as np

from corn.geom import Pose, Rotation
from corn.reward import (
    ObjectState,
    RewardParams,
    potential_contact,
    potential_reach,
    reward_terms,
    success,
)

params = RewardParams()
print(f"potentials at zero distance: reach {potential_reach(0.0):.4f}, "
      f"contact {potential_contact(0.0):.4f}")
print(f"decay: reach potential at 5 cm is {potential_reach(0.05):.4f}")

goal = Pose([0.3, 0.0, 0.02], Rotation.identity())


def state(x, tip_x, qdot_scale):
    return ObjectState(
        pose=Pose([x, 0.0, 0.02], Rotation.identity()),
        goal=goal,
        half_extents=(0.05, 0.04, 0.03),
        com=(0.0, 0.0, 0.0),
        gripper_tip=(tip_x, 0.0, 0.06),
        tau=np.full(7, 0.2),
        qdot=np.full(7, qdot_scale),
    )


# the object slides from x=0 to the goal at x=0.3 while the hand closes in
xs = np.linspace(0.0, 0.3, 16)
states = [state(x, tip_x=x - 0.02, qdot_scale=0.3) for x in xs]

print(f"\n{'step':>4} {'d_goal':>7} {'reward':>9} {'success':>8}")
total = 0.0
for t in range(1, len(states)):
    flag = success(states[t], params)
    terms = reward_terms(states[t - 1], states[t], flag, params)
    total += terms["total"]
    d = np.linalg.norm(states[t].pose.translation - goal.translation)
    print(f"{t:>4} {d:7.3f} {terms['total']:+9.4f} {str(flag):>8}")
print(f"\nundiscounted return of the approach: {total:+.4f}")
print("(dense shaping is positive while closing in; the +1 arrives at success)")
