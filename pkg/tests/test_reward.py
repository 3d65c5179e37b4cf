import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from camcover.config import RewardConfig
from camcover.evaluation import coverage_rate
from camcover.geometry import CameraPose, GroundPoint
from camcover.perception import Detection
from camcover.reward import (box_reward, combine, composition, compute_rewards, direction_bounds,
                             direction_reward, position_reward, team_reward, total_reward,
                             visibility_reward)
from camcover.simenv import BoundingBox

S0 = 640 * 480
W = RewardConfig()


def vis_matrices(max_n=5, max_m=8):
    return st.tuples(st.integers(1, max_n), st.integers(1, max_m)).flatmap(
        lambda nm: arrays(np.int8, nm, elements=st.integers(0, 1)))


def box_of_area(area, tid=0):
    return BoundingBox(0.0, 0.0, area / 10.0, 10.0, tid)


def det(x, y, tid=0):
    return Detection(BoundingBox(0, 0, 1, 1, tid), GroundPoint(x, y))


def cam_at_origin(yaw):
    return CameraPose(0.0, 0.0, 0.0, 500.0, yaw, -0.1)


class TestTeam:
    def test_all_covered(self):
        assert team_reward(np.ones((3, 22))) == 1.0

    def test_fourteen_of_twenty_two(self):
        v = np.zeros((2, 22))
        v[0, :10] = 1
        v[1, 6:14] = 1
        assert team_reward(v) == pytest.approx(14 / 22)
        assert team_reward(v) == pytest.approx(0.6364, abs=1e-4)

    def test_zero(self):
        assert team_reward(np.zeros((4, 5))) == 0.0

    def test_rejects_bad_m(self):
        with pytest.raises(ValueError):
            team_reward(np.zeros((2, 0)))
        with pytest.raises(ValueError):
            team_reward(np.zeros((2, 3)), m=4)

    @given(vis_matrices())
    def test_equals_single_step_coverage(self, v):
        assert team_reward(v) == pytest.approx(coverage_rate(v[None]))

    @given(vis_matrices(), st.data())
    def test_monotone_in_coverage(self, v, data):
        i = data.draw(st.integers(0, v.shape[0] - 1))
        j = data.draw(st.integers(0, v.shape[1] - 1))
        more = v.copy()
        more[i, j] = 1
        assert team_reward(more) >= team_reward(v)


class TestBox:
    def test_half_of_cap_example(self):
        assert box_reward([box_of_area(0.001 * S0)], S0, 0.2) == pytest.approx(0.1)

    def test_capped(self):
        assert box_reward([box_of_area(0.01 * S0)], S0, 0.2) == pytest.approx(0.2)

    def test_empty(self):
        assert box_reward([], S0, 0.2) == 0.0

    def test_sums_boxes(self):
        boxes = [box_of_area(0.0004 * S0, 0), box_of_area(0.0006 * S0, 1)]
        assert box_reward(boxes, S0, 0.2) == pytest.approx(0.1)

    def test_rejects_bad_frame(self):
        with pytest.raises(ValueError):
            box_reward([], 0.0, 0.2)


class TestVisibility:
    def test_alone(self):
        assert visibility_reward(np.array([[1], [0]]), 0) == 1.0

    def test_shared(self):
        v = np.array([[1], [1]])
        assert visibility_reward(v, 0) == 0.5 and visibility_reward(v, 1) == 0.5

    def test_sees_nothing(self):
        assert visibility_reward(np.array([[0, 0], [1, 1]]), 0) == 0.0

    @given(vis_matrices())
    def test_brute_force(self, v):
        n, m = v.shape
        for i in range(n):
            expect = 0.0
            for j in range(m):
                if v[i, j]:
                    expect += 1.0 / sum(int(v[k, j]) for k in range(n))
            assert visibility_reward(v, i) == pytest.approx(expect)

    @given(vis_matrices())
    def test_shares_sum_to_covered_count(self, v):
        total = sum(visibility_reward(v, i) for i in range(v.shape[0]))
        assert total == pytest.approx(int(v.max(axis=0).sum()))


class TestDirection:
    def test_centered(self):
        assert direction_reward(cam_at_origin(0.0), [det(1000, 0)], math.pi / 4) == pytest.approx(1.0)

    def test_zero_at_alpha_max(self):
        d = [det(1000 * math.cos(math.pi / 4), 1000 * math.sin(math.pi / 4))]
        assert direction_reward(cam_at_origin(0.0), d, math.pi / 4) == pytest.approx(0.0, abs=1e-12)

    def test_eighth_turn(self):
        d = [det(1000 * math.cos(math.pi / 8), -1000 * math.sin(math.pi / 8))]
        assert direction_reward(cam_at_origin(0.0), d, math.pi / 4) == pytest.approx(0.5)

    def test_none_visible(self):
        assert direction_reward(cam_at_origin(0.3), [], math.pi / 4) == 0.0

    def test_uses_mean_position(self):
        d = [det(1000, 500), det(1000, -500)]
        assert direction_reward(cam_at_origin(0.0), d, math.pi / 4) == pytest.approx(1.0)

    @given(st.floats(-math.pi, math.pi), st.floats(-5000, 5000), st.floats(-5000, 5000))
    def test_bounds(self, yaw, x, y):
        if math.hypot(x, y) < 1e-6:
            return
        lo, hi = direction_bounds(math.pi / 4)
        r = direction_reward(cam_at_origin(yaw), [det(x, y)], math.pi / 4)
        assert lo - 1e-12 <= r <= hi + 1e-12


class TestPosition:
    def test_far_enough(self):
        assert position_reward(np.array([[0, 0], [5000, 0]]), 0, 5000) == 0.0
        assert position_reward(np.array([[0, 0], [6000, 0]]), 0, 5000) == 0.0

    def test_coincident(self):
        assert position_reward(np.array([[10, 10], [10, 10]]), 0, 5000) == -1.0

    def test_half(self):
        assert position_reward(np.array([[0, 0], [1500, 2000]]), 1, 5000) == pytest.approx(-0.5)

    def test_nearest_counts(self):
        pos = np.array([[0, 0], [4000, 0], [0, 2500]])
        assert position_reward(pos, 0, 5000) == pytest.approx(-0.5)

    def test_single_camera(self):
        assert position_reward(np.array([[0.0, 0.0]]), 0, 5000) == 0.0

    @given(arrays(float, (4, 2), elements=st.floats(-5000, 5000)))
    def test_bounds(self, pos):
        for i in range(4):
            assert -1.0 <= position_reward(pos, i, 5000) <= 0.0


class TestTotal:
    def test_weighted_example(self):
        ind, tot = combine(1.0, [0.5], [0.0], [0.0], [0.0], W)
        assert ind[0] == pytest.approx(0.5) and tot[0] == pytest.approx(0.7)

    def test_all_zero(self):
        _, tot = combine(0.0, [0.0], [0.0], [0.0], [0.0], W)
        assert tot[0] == 0.0

    def test_table_one_example(self):
        _, tot = combine(0.5, [0.2], [1.0], [1.0], [0.0], W)
        assert tot[0] == pytest.approx(0.92)

    def test_ablate_team_keeps_individual(self):
        w = RewardConfig(ablate=["team"])
        ind, tot = combine(1.0, [0.2], [1.0], [1.0], [-0.5], w)
        assert tot[0] == pytest.approx(ind[0]) == pytest.approx(0.2 + 0.8 + 0.2 - 0.1)

    def test_all_individual_keeps_team(self):
        w = RewardConfig(ablate=["all-individual"])
        _, tot = combine(0.75, [0.2, 0.1], [1.0, 0.0], [1.0, 1.0], [0.0, -1.0], w)
        np.testing.assert_allclose(tot, 0.75)

    @pytest.mark.parametrize("term,args", [("box", (0.2, 0, 0, 0)), ("vis", (0, 1.0, 0, 0)),
                                           ("dir", (0, 0, 1.0, 0)), ("pos", (0, 0, 0, -1.0))])
    def test_single_term_ablation(self, term, args):
        full = combine(0.0, *[[a] for a in args], W)[1][0]
        dropped = combine(0.0, *[[a] for a in args], RewardConfig(ablate=[term]))[1][0]
        assert full != 0.0 and dropped == 0.0

    def test_composition_logs_multipliers(self):
        assert composition(W) == pytest.approx(
            {"team": 0.4, "box": 0.6, "vis": 0.48, "dir": 0.12, "pos": 0.12})
        assert composition(RewardConfig(ablate=["team"]))["team"] == 0.0
        assert composition(RewardConfig(ablate=["team"]))["box"] == 1.0
        assert composition(RewardConfig(ablate=["all-individual"])) == {
            "team": 1.0, "box": 0.0, "vis": 0.0, "dir": 0.0, "pos": 0.0}


@settings(max_examples=60)
@given(st.integers(1, 4), st.integers(1, 6), st.data())
def test_breakdown_invariants(n, m, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    cams = tuple(CameraPose(0.0, float(x), float(y), 500.0, float(yaw), -0.1)
                 for x, y, yaw in zip(rng.uniform(-5000, 5000, n), rng.uniform(-2500, 2500, n),
                                      rng.uniform(-math.pi, math.pi, n)))
    boxes, dets = [], []
    for _ in range(n):
        cam_boxes, cam_dets = [], []
        for j in range(m):
            if rng.random() < 0.5:
                u0, v0 = rng.uniform(0, 600), rng.uniform(0, 440)
                b = BoundingBox(u0, v0, u0 + rng.uniform(0, 40), v0 + rng.uniform(0, 40), j)
                cam_boxes.append(b)
                cam_dets.append(Detection(b, GroundPoint(*rng.uniform(-5000, 5000, 2))))
        boxes.append(cam_boxes)
        dets.append(cam_dets)
    v = np.zeros((n, m), dtype=np.int8)
    for i in range(n):
        for b in boxes[i]:
            v[i, b.target_id] = int(b.area / S0 > 0.0005)
    rb = compute_rewards(v, boxes, dets, cams, S0, W)
    lo, hi = direction_bounds(W.alpha_max)
    assert 0.0 <= rb.team <= 1.0
    assert np.all((rb.box >= 0) & (rb.box <= W.mu_max))
    assert np.all((rb.position >= -1) & (rb.position <= 0))
    assert np.all((rb.direction >= lo - 1e-12) & (rb.direction <= hi + 1e-12))
    assert rb.visibility.sum() == pytest.approx(v.max(axis=0).sum())
    np.testing.assert_allclose(rb.total, W.w_team * rb.team + (1 - W.w_team) * rb.individual)
    np.testing.assert_allclose(total_reward(rb, W), rb.total)
