import numpy as np

from corn.geom import Pose, Rotation, random_rotation
from corn.reward import (
    ObjectState,
    RewardParams,
    bbox_distance,
    energy_penalty,
    goal_distance,
    hand_object_distance,
    potential_contact,
    potential_reach,
    reward_terms,
    shaped_reward,
    success,
    total_reward,
)

P = RewardParams()


def state_at(pose, goal, tau=None, qdot=None, tip=(1.0, 0, 0)):
    return ObjectState(
        pose=pose, goal=goal,
        half_extents=(0.05, 0.04, 0.03), com=(0.0, 0.0, 0.0),
        gripper_tip=tip,
        tau=np.zeros(7) if tau is None else tau,
        qdot=np.zeros(7) if qdot is None else qdot,
    )


def random_pose(rng, scale=0.5):
    return Pose(rng.normal(size=3) * scale, random_rotation(rng))


# ------------------------------------------------------------ bbox distance


def test_bbox_distance_identity():
    p = Pose([0.3, 0.2, 0.1], Rotation.from_axis_angle([0.1, 0.2, 0.3]))
    assert bbox_distance(p, p, (0.05, 0.04, 0.03)) == 0.0


def test_bbox_distance_pure_translation():
    a = Pose.identity()
    b = Pose([0.1, 0, 0], Rotation.identity())
    assert abs(bbox_distance(a, b, (0.05, 0.04, 0.03)) - 0.1) < 1e-15


def test_bbox_distance_rotation_vs_corner_enumeration():
    a = Pose.identity()
    b = Pose(np.zeros(3), Rotation.from_axis_angle([0, 0, np.pi / 2]))
    he = np.array([0.5, 0.5, 0.5])
    total = 0.0
    for sx in (-1, 1):
        for sy in (-1, 1):
            for sz in (-1, 1):
                c = np.array([sx, sy, sz]) * he
                total += np.linalg.norm(a.apply(c) - b.apply(c))
    assert abs(bbox_distance(a, b, he) - total / 8) < 1e-12


def test_bbox_distance_pseudometric():
    rng = np.random.default_rng(0)
    he = (0.06, 0.05, 0.04)
    for _ in range(100):
        a, b, c = (random_pose(rng) for _ in range(3))
        dab = bbox_distance(a, b, he)
        dba = bbox_distance(b, a, he)
        assert abs(dab - dba) < 1e-12
        assert dab <= bbox_distance(a, c, he) + bbox_distance(c, b, he) + 1e-12


# ------------------------------------------------------------------ success


def test_success_inside_thresholds():
    goal = Pose.identity()
    pose = Pose([0.04, 0, 0], Rotation.from_axis_angle([0.09, 0, 0]))
    assert success(state_at(pose, goal), P)


def test_success_translation_too_far():
    assert not success(state_at(Pose([0.06, 0, 0], Rotation.identity()), Pose.identity()), P)


def test_success_rotation_too_far():
    pose = Pose(np.zeros(3), Rotation.from_axis_angle([0.11, 0, 0]))
    assert not success(state_at(pose, Pose.identity()), P)


def test_success_boundaries_are_strict():
    # translation error exactly 0.05 m and rotation error exactly 0.1 rad
    # both reproduce the threshold float bit-exactly and must fail
    goal = Pose.identity()
    pose_t = Pose([0.05, 0.0, 0.0], Rotation.identity())
    assert float(np.linalg.norm(pose_t.translation)) == P.success_pos
    assert not success(state_at(pose_t, goal), P)

    rot = Rotation.from_axis_angle([0.1, 0.0, 0.0])
    assert Rotation.identity().angle_to(rot) == P.success_rot
    assert not success(state_at(Pose(np.zeros(3), rot), goal), P)

    just_inside = Pose([np.nextafter(0.05, 0.0), 0.0, 0.0], Rotation.identity())
    assert success(state_at(just_inside, goal), P)


# --------------------------------------------------------------- potentials


def test_potentials_at_zero_distance():
    assert potential_reach(0.0, P) == 0.302
    assert potential_contact(0.0, P) == 0.0604


def test_potential_reach_at_one_centimeter():
    got = potential_reach(0.01, P)
    log_domain = np.exp(np.log(0.302) + 243.12 * 0.01 * np.log(0.99))
    assert abs(got - log_domain) < 1e-12
    assert abs(got - 0.29472) < 1e-4


def test_potentials_monotone_and_bounded():
    ds = np.linspace(0.0, 2.0, 200)
    vals = [potential_reach(d, P) for d in ds]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert all(0 < v <= P.k_goal for v in vals)


# ------------------------------------------------------------------ shaping


def test_shaped_reward_constant_potential():
    assert abs(shaped_reward(0.25, 0.25, P) - (P.gamma - 1) * 0.25) < 1e-15


def test_shaped_reward_positive_when_approaching():
    phi_prev = 0.1
    phi_next = phi_prev / P.gamma + 1e-6
    assert shaped_reward(phi_prev, phi_next, P) > 0


def test_telescoping_identity():
    rng = np.random.default_rng(1)
    for _ in range(20):
        phis = rng.random(101) * 0.3
        total = sum(P.gamma**t * shaped_reward(phis[t], phis[t + 1], P) for t in range(100))
        closed = P.gamma**100 * phis[100] - phis[0]
        assert abs(total - closed) < 1e-12


# ------------------------------------------------------------------- energy


def test_energy_penalty_ones():
    assert abs(energy_penalty(np.ones(7), np.ones(7), P) - 7e-4) < 1e-18


def test_energy_penalty_zero_velocity():
    assert energy_penalty(np.ones(7), np.zeros(7), P) == 0.0


def test_energy_penalty_sign_follows_power():
    assert energy_penalty(np.ones(7), -np.ones(7), P) < 0


# -------------------------------------------------------------------- total


def test_stationary_non_success_is_negative():
    pose = Pose([0.2, 0, 0], Rotation.identity())
    st = state_at(pose, Pose.identity())
    r = total_reward(st, st, False, P)
    phi = potential_reach(goal_distance(st), P) + potential_contact(hand_object_distance(st), P)
    assert abs(r - (P.gamma - 1) * phi) < 1e-15
    assert r < 0


def test_success_adds_exactly_one():
    rng = np.random.default_rng(2)
    prev = state_at(random_pose(rng, 0.1), Pose.identity())
    nxt = state_at(random_pose(rng, 0.1), Pose.identity())
    assert total_reward(prev, nxt, True, P) - total_reward(prev, nxt, False, P) == 1.0


def test_total_equals_sum_of_terms():
    rng = np.random.default_rng(3)
    for _ in range(20):
        prev = state_at(random_pose(rng, 0.2), random_pose(rng, 0.2),
                        tau=rng.normal(size=7), qdot=rng.normal(size=7))
        nxt = state_at(random_pose(rng, 0.2), prev.goal,
                       tau=rng.normal(size=7), qdot=rng.normal(size=7))
        terms = reward_terms(prev, nxt, False, P)
        direct = (
            shaped_reward(potential_reach(goal_distance(prev), P),
                          potential_reach(goal_distance(nxt), P), P)
            + shaped_reward(potential_contact(hand_object_distance(prev), P),
                            potential_contact(hand_object_distance(nxt), P), P)
            - energy_penalty(nxt.tau, nxt.qdot, P)
        )
        assert abs(terms["total"] - direct) < 1e-12
