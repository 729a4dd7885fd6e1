"""Success test, potential-based shaping, and energy penalty.

Rewards decompose as r = 1{success} + shaped(reach) + shaped(contact) - energy,
with potentials phi(d) = k * gamma^(k_decay * d). The goal distance is a
bounding-box pseudometric (mean displacement of the 8 box corners between the
object pose and the goal pose); the contact distance runs from the gripper tip
to the object's center of mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SizeMismatch
from .geom import Pose

_CORNER_SIGNS = np.array(
    [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=np.float64
)


@dataclass(frozen=True)
class RewardParams:
    k_goal: float = 0.302
    k_contact: float = 0.0604
    k_energy: float = 0.0001
    k_decay: float = 243.12
    gamma: float = 0.99
    success_pos: float = 0.05   # m
    success_rot: float = 0.1    # rad


@dataclass(frozen=True)
class ObjectState:
    pose: Pose
    goal: Pose
    half_extents: np.ndarray   # (3,) bounding box half extents, m
    com: np.ndarray            # (3,) center of mass in the object frame
    gripper_tip: np.ndarray    # (3,) world frame
    tau: np.ndarray            # (7,) joint torques
    qdot: np.ndarray           # (7,) joint velocities

    def __post_init__(self):
        for name, n in (("half_extents", 3), ("com", 3), ("gripper_tip", 3), ("tau", 7), ("qdot", 7)):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64).reshape(n))


def bbox_distance(pose: Pose, goal: Pose, half_extents) -> float:
    """Mean distance between the 8 bounding-box corners under the two poses."""
    corners = _CORNER_SIGNS * np.asarray(half_extents, dtype=np.float64).reshape(3)
    return float(np.mean(np.linalg.norm(pose.apply(corners) - goal.apply(corners), axis=1)))


def success(state: ObjectState, params: RewardParams = RewardParams()) -> bool:
    """Strict thresholds on translation error and geodesic rotation angle."""
    pos_err = float(np.linalg.norm(state.pose.translation - state.goal.translation))
    rot_err = state.pose.rotation.angle_to(state.goal.rotation)
    return pos_err < params.success_pos and rot_err < params.success_rot


def potential_reach(d_og: float, params: RewardParams = RewardParams()) -> float:
    return params.k_goal * params.gamma ** (params.k_decay * d_og)

def potential_contact(d_ho: float, params: RewardParams = RewardParams()) -> float:
    return params.k_contact * params.gamma ** (params.k_decay * d_ho)


def shaped_reward(phi_prev: float, phi_next: float, params: RewardParams = RewardParams()) -> float:
    return params.gamma * phi_next - phi_prev


def energy_penalty(tau, qdot, params: RewardParams = RewardParams()) -> float:
    tau = np.asarray(tau, dtype=np.float64).reshape(-1)
    qdot = np.asarray(qdot, dtype=np.float64).reshape(-1)
    if tau.shape != (7,) or qdot.shape != (7,):
        raise SizeMismatch("tau and qdot must have length 7")
    return params.k_energy * float(np.dot(tau, qdot))


def goal_distance(state: ObjectState) -> float:
    return bbox_distance(state.pose, state.goal, state.half_extents)


def hand_object_distance(state: ObjectState) -> float:
    return float(np.linalg.norm(state.gripper_tip - state.pose.apply(state.com)))


def reward_terms(prev: ObjectState, nxt: ObjectState, success_flag: bool,
                 params: RewardParams = RewardParams()) -> dict:
    """All reward components for one transition; energy uses the new state."""
    r_reach = shaped_reward(potential_reach(goal_distance(prev), params),
                            potential_reach(goal_distance(nxt), params), params)
    r_contact = shaped_reward(potential_contact(hand_object_distance(prev), params),
                              potential_contact(hand_object_distance(nxt), params), params)
    energy = energy_penalty(nxt.tau, nxt.qdot, params)
    return {
        "r_success": 1.0 if success_flag else 0.0,
        "r_reach": r_reach,
        "r_contact": r_contact,
        "energy": energy,
        "total": (1.0 if success_flag else 0.0) + r_reach + r_contact - energy,
    }


def total_reward(prev: ObjectState, nxt: ObjectState, success_flag: bool,
                 params: RewardParams = RewardParams()) -> float:
    return reward_terms(prev, nxt, success_flag, params)["total"]
