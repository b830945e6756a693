import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drpi.costs import (CostError, CostModel, Rect, control_cost,
                        navigation_cost, quadratic_cost, state_cost,
                        trajectory_cost)

R2 = 1e-3 * np.eye(2)


def nav(**kw):
    return navigation_cost(4, R2, **kw)


class TestStateCost:
    def test_zero_at_target(self):
        cm = nav()
        assert state_cost(cm, np.array([0.0, 0.0, 0.0, 0.0])) == pytest.approx(0.0)

    def test_free_space_distance_term(self):
        cm = nav()
        x = np.array([2.0, 0.0, 0.0, 0.0])  # outside obstacle, inside boundary
        assert state_cost(cm, x) == pytest.approx(1e-2 * 2.0)

    def test_obstacle_hit(self):
        cm = nav()
        x = np.array([-0.6, 0.8, 0.0, 0.0])  # in the obstacle, ||x - x*|| = 1
        assert np.hypot(-0.6, 0.8) == pytest.approx(1.0)
        assert state_cost(cm, x) == pytest.approx(1e-2 * 1.0 + 1e2)

    def test_boundary_exit(self):
        cm = nav()
        x = np.array([5.5, 0.0, 0.0, 0.0])
        assert state_cost(cm, x) == pytest.approx(1e-2 * 5.5 + 1e2)

    def test_distance_includes_velocity_components(self):
        cm = nav()
        x = np.array([0.0, 0.0, 3.0, 4.0])
        assert state_cost(cm, x) == pytest.approx(1e-2 * 5.0)

    def test_dimension_mismatch(self):
        cm = nav()
        with pytest.raises(CostError, match="state dim"):
            state_cost(cm, np.zeros(3))

    @given(st.lists(st.floats(-8, 8, allow_nan=False), min_size=2, max_size=2))
    def test_indicators_are_binary_and_exclusive(self, pos):
        cm = navigation_cost(2, R2, c1=0.0)
        val = float(state_cost(cm, np.array(pos)))
        # with c1 = 0 only the indicator terms remain; the obstacle lies
        # strictly inside the boundary so both cannot fire at once
        assert val in (0.0, 1e2)

    @given(st.lists(st.floats(-20, 20, allow_nan=False), min_size=4, max_size=4))
    def test_nonnegative(self, x):
        cm = nav()
        assert state_cost(cm, np.array(x)) >= 0.0
        assert float(cm.psi(np.array(x))) >= 0.0


class TestControlCost:
    def test_zero(self):
        assert control_cost(nav(), np.zeros(2)) == pytest.approx(0.0)

    def test_benchmark_weight(self):
        assert control_cost(nav(), np.array([1.0, 1.0])) == pytest.approx(1e-3)

    def test_diagonal(self):
        cm = navigation_cost(4, np.diag([2.0, 4.0]))
        assert control_cost(cm, np.array([1.0, 1.0])) == pytest.approx(3.0)

    def test_dimension_mismatch(self):
        with pytest.raises(CostError):
            control_cost(nav(), np.zeros(3))

    @given(st.lists(st.floats(-50, 50, allow_nan=False), min_size=2, max_size=2))
    def test_nonnegative(self, u):
        assert control_cost(nav(), np.array(u)) >= 0.0


class TestTrajectoryCost:
    def test_hand_accumulated_constant_path(self):
        # 11 constant free-space states at distance 2: nine interior states
        # pay q = 0.02 each over dt = 0.1, terminal pays 10 * 2
        cm = nav()
        path = np.tile([2.0, 0.0, 0.0, 0.0], (11, 1))
        assert trajectory_cost(cm, path, 0.1) == pytest.approx(9 * 0.002 + 20.0, abs=1e-12)

    def test_single_state_is_terminal_only(self):
        cm = nav()
        x = np.array([[3.0, 4.0, 0.0, 0.0]])
        assert trajectory_cost(cm, x, 0.1) == pytest.approx(10.0 * 5.0)

    def test_zero_cost_field(self):
        cm = quadratic_cost(0.0, 0.0, np.array([[1.0]]))
        path = np.random.default_rng(0).normal(size=(6, 1))
        assert trajectory_cost(cm, path, 0.1) == 0.0

    def test_empty_errors(self):
        with pytest.raises(CostError):
            trajectory_cost(nav(), np.zeros((0, 4)), 0.1)

    @given(st.integers(3, 12), st.integers(1, 10))
    def test_split_additivity(self, n_states, split_seed):
        cm = nav()
        rng = np.random.default_rng(split_seed)
        path = rng.normal(scale=3.0, size=(n_states, 4))
        dt = 0.05
        total = trajectory_cost(cm, path, dt)
        j = 1 + split_seed % (n_states - 1)
        head = float(np.sum(cm.q(path[1:j], 0.0))) * dt if j > 1 else 0.0
        tail = trajectory_cost(cm, path[j - 1:], dt)
        assert total == pytest.approx(head + tail, abs=1e-12)


class TestValidation:
    def test_rect_degenerate(self):
        with pytest.raises(CostError):
            Rect((0.0, 0.0), (0.0, 1.0))

    def test_r_not_symmetric(self):
        with pytest.raises(CostError, match="symmetric"):
            navigation_cost(4, np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_r_not_positive_definite(self):
        with pytest.raises(CostError, match="positive definite"):
            navigation_cost(4, np.array([[1.0, 0.0], [0.0, -1.0]]))

    def test_obstacle_outside_boundary(self):
        with pytest.raises(CostError, match="strictly inside"):
            navigation_cost(4, R2, obstacle=Rect((-6.0, 0.0), (-4.0, 1.0)))

    def test_negative_coefficient(self):
        with pytest.raises(CostError):
            navigation_cost(4, R2, c1=-1.0)

    def test_navigation_flag(self):
        assert nav().is_navigation
        assert not quadratic_cost(1.0, 0.0, np.array([[1.0]])).is_navigation
