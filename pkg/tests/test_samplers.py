from __future__ import annotations

import math

import numpy as np
import pytest

from kramers.errors import AllTimeoutError, DivergenceError, DomainError
from kramers.objectives import double_well, quadratic
from kramers.samplers import (
    Ball,
    SamplerConfig,
    batch_hitting,
    hitting_time,
    ld_step,
    nld_step,
    simulate,
    stream,
    uld_step,
)


class TestSteps:
    def test_ld_fixed_point(self):
        x = np.array([0.3, -1.2])
        np.testing.assert_array_equal(ld_step(x, np.zeros(2), 0.1, 1.0, np.zeros(2)), x)

    def test_ld_gradient_move(self):
        np.testing.assert_allclose(ld_step(np.zeros(2), np.array([1.0, 0.0]), 0.1, 1.0, np.zeros(2)), [-0.1, 0.0])

    def test_ld_noise_scale(self):
        out = ld_step(np.zeros(1), np.zeros(1), 0.5, 4.0, np.ones(1))
        assert out[0] == pytest.approx(math.sqrt(2 * 0.5 / 4.0))

    def test_noiseless_limit_is_gradient_descent(self):
        x = np.array([1.0, 2.0])
        g = np.array([0.5, -0.5])
        np.testing.assert_array_equal(ld_step(x, g, 0.1, math.inf, np.ones(2)), x - 0.1 * g)

    def test_uld_fixed_point(self):
        x, v = uld_step(np.array([1.0]), np.zeros(1), np.zeros(1), 0.1, 2.0, 1.0, np.zeros(1))
        assert x[0] == 1.0 and v[0] == 0.0

    def test_uld_position_uses_old_velocity(self):
        x, v = uld_step(np.zeros(2), np.array([1.0, 0.0]), np.zeros(2), 0.5, 1.0, 1.0, np.zeros(2))
        np.testing.assert_allclose(x, [0.5, 0.0])
        np.testing.assert_allclose(v, [0.5, 0.0])

    def test_uld_hand_computed_step(self):
        # v' = 1 - 0.1 (2*1 + 1) + sqrt(2*2*0.1/1)*0.5 = 0.7 + sqrt(0.4)/2
        x, v = uld_step(np.array([2.0, 0.0]), np.array([1.0, 0.0]), np.array([1.0, 0.0]),
                        0.1, 2.0, 1.0, np.array([0.5, 0.0]))
        np.testing.assert_allclose(x, [2.1, 0.0])
        np.testing.assert_allclose(v, [0.7 + math.sqrt(0.4) / 2, 0.0])

    def test_nld_zero_drift_matches_ld(self):
        rng = np.random.default_rng(0)
        x, g, xi = rng.standard_normal((3, 4))
        np.testing.assert_array_equal(nld_step(x, g, 0.01, 2.0, np.zeros((4, 4)), xi), ld_step(x, g, 0.01, 2.0, xi))

    def test_nld_rotation(self):
        J = np.array([[0.0, 1.0], [-1.0, 0.0]])
        x = np.array([1.0, 1.0])
        np.testing.assert_allclose(nld_step(x, np.array([1.0, 0.0]), 0.1, 1.0, J, np.zeros(2)), x - np.array([0.1, -0.1]))

    def test_drift_orthogonality(self):
        J = np.array([[0.0, 2.0, -1.0], [-2.0, 0.0, 0.5], [1.0, -0.5, 0.0]])
        g = np.array([0.3, -1.1, 2.0])
        assert g @ (J @ g) == pytest.approx(0.0, abs=1e-15)


class TestConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(DomainError):
            SamplerConfig("LD", eta=0.0, beta=1.0)
        with pytest.raises(DomainError):
            SamplerConfig("LD", eta=0.1, beta=0.0)
        with pytest.raises(DomainError):
            SamplerConfig("ULD", eta=0.1, beta=1.0)
        with pytest.raises(DomainError):
            SamplerConfig("NLD", eta=0.1, beta=1.0, J=np.eye(2))
        with pytest.raises(DomainError):
            SamplerConfig("XLD", eta=0.1, beta=1.0)
        with pytest.raises(DomainError):
            SamplerConfig("LD", eta=0.1, beta=1.0, seed=2 ** 64)


class TestSimulate:
    def test_noiseless_converges_to_minimizer(self):
        q = quadratic(np.diag([0.5, 1.0]), [1.0, 0.5])
        eta = 0.1
        steps = int(math.ceil(math.log(1e-7) / math.log(1 - eta * 0.5)))
        traj = simulate(q, [3.0, -3.0], SamplerConfig("LD", eta, math.inf, max_steps=steps, record_stride=steps))
        assert np.linalg.norm(traj.positions[-1] - q.minimizer) <= 1e-6

    def test_same_seed_same_trajectory(self):
        obj, land = double_well(2, c=1.0)
        cfg = SamplerConfig("ULD", 0.01, 3.0, gamma=1.0, max_steps=500, seed=42)
        a = simulate(obj, land.a1, cfg)
        b = simulate(obj, land.a1, cfg)
        np.testing.assert_array_equal(a.positions, b.positions)
        np.testing.assert_array_equal(a.velocities, b.velocities)
        c = simulate(obj, land.a1, SamplerConfig("ULD", 0.01, 3.0, gamma=1.0, max_steps=500, seed=43))
        assert not np.array_equal(a.positions, c.positions)

    def test_block_length_does_not_matter(self):
        q = quadratic(np.eye(2))
        cfg = SamplerConfig("LD", 0.05, 1.0, max_steps=300, seed=5)
        a = simulate(q, [1.0, 1.0], cfg, block=7)
        b = simulate(q, [1.0, 1.0], cfg, block=512)
        np.testing.assert_array_equal(a.positions, b.positions)

    def test_nld_zero_drift_trajectory_bit_identical(self):
        obj, land = double_well(2, c=1.0, omega=[1.0])
        a = simulate(obj, land.a1, SamplerConfig("LD", 0.01, 5.0, max_steps=1000, seed=9))
        b = simulate(obj, land.a1, SamplerConfig("NLD", 0.01, 5.0, J=np.zeros((2, 2)), max_steps=1000, seed=9))
        np.testing.assert_array_equal(a.positions, b.positions)

    def test_record_stride(self):
        traj = simulate(quadratic(np.eye(1)), [1.0], SamplerConfig("ULD", 0.1, 1.0, gamma=1.0, max_steps=10, record_stride=3))
        np.testing.assert_array_equal(traj.step_indices, [0, 3, 6, 9])
        assert traj.velocities.shape == (4, 1)
        assert traj.header() == ["step", "x_0", "v_0"]

    def test_initial_velocity_default_and_override(self):
        q = quadratic(np.eye(1))
        traj = simulate(q, [0.0], SamplerConfig("ULD", 0.5, math.inf, gamma=1.0, max_steps=1, v0=[1.0]))
        np.testing.assert_allclose(traj.positions[:, 0], [0.0, 0.5])
        traj = simulate(q, [0.0], SamplerConfig("ULD", 0.5, math.inf, gamma=1.0, max_steps=1))
        np.testing.assert_allclose(traj.positions[:, 0], [0.0, 0.0])

    def test_divergence_is_an_error(self):
        with pytest.raises(DivergenceError):
            simulate(quadratic(np.eye(1)), [1.0], SamplerConfig("LD", 3.0, math.inf, max_steps=200))

    def test_stream_matches_simulate(self):
        q = quadratic(np.diag([1.0, 2.0]))
        cfg = SamplerConfig("LD", 0.05, 1.0, max_steps=100, seed=3)
        traj = simulate(q, [1.0, 1.0], cfg)
        blocks = list(stream(q, [1.0, 1.0], cfg, 100, n_paths=1, block=30))
        got = np.concatenate([blk[:, 0, :] for _, blk in blocks])
        assert [k0 for k0, _ in blocks] == [0, 1, 31, 61, 91]
        np.testing.assert_array_equal(got, traj.positions)

    def test_ar1_stationary_variance(self):
        # LD on F = m x^2/2 is x' = (1 - eta m) x + sqrt(2 eta / beta) xi, whose
        # stationary variance is (2 eta / beta) / (1 - (1 - eta m)^2) = 2 / (beta m (2 - eta m))
        eta, beta, m = 0.01, 1.0, 1.0
        n_paths, n_steps, burn = 400, 5000, 1000
        q = quadratic(np.eye(1) * m)
        cfg = SamplerConfig("LD", eta, beta, seed=17)
        samples = [blk[:, :, 0] for k0, blk in stream(q, [0.0], cfg, n_steps, n_paths=n_paths, block=1000)
                   if k0 >= burn]
        var = np.concatenate(samples).var()
        assert var == pytest.approx(2 / (beta * m * (2 - eta * m)), rel=0.05)


class TestHitting:
    def test_start_inside_region(self):
        steps, via = hitting_time(quadratic(np.eye(1)), [0.0], Ball([0.0], 0.1), SamplerConfig("LD", 0.1, 1.0))
        assert steps == 0 and via == "stop"

    def test_noiseless_contraction_count(self):
        q = quadratic(np.eye(2) * 0.5)
        eta, tol, r0 = 0.1, 1e-3, 2.0
        steps, via = hitting_time(q, [r0, 0.0], Ball([0.0, 0.0], tol), SamplerConfig("LD", eta, math.inf))
        assert steps == math.ceil(math.log(tol / r0) / math.log(1 - eta * 0.5))

    def test_timeout_marker(self):
        steps, via = hitting_time(quadratic(np.eye(1)), [5.0], Ball([100.0], 0.1),
                                  SamplerConfig("LD", 0.1, math.inf, max_steps=50))
        assert steps is None and via == "timeout"

    def test_boundary_exit(self):
        obj, land = double_well(1, c=1.0)
        steps, via = hitting_time(obj, [0.0], Ball(land.a2, 0.1), SamplerConfig("LD", 0.01, 1.0, seed=1, max_steps=10**6),
                                  domain_radius=0.5)
        assert via == "boundary" and steps > 0

    def test_thread_count_independence(self):
        obj, land = double_well(1, c=1.0)
        cfg = SamplerConfig("LD", 0.01, 3.0, seed=8, max_steps=10**6)
        a = batch_hitting(obj, land.a1, Ball(land.a2, 0.2), cfg, 37, threads=1)
        b = batch_hitting(obj, land.a1, Ball(land.a2, 0.2), cfg, 37, threads=4)
        np.testing.assert_array_equal(a.steps, b.steps)
        assert a.mean == b.mean

    def test_paths_use_distinct_streams(self):
        obj, land = double_well(1, c=1.0)
        r = batch_hitting(obj, land.a1, Ball(land.a2, 0.2), SamplerConfig("LD", 0.01, 3.0, seed=8), 2)
        assert r.steps[0] != r.steps[1]

    def test_stderr_scaling(self):
        obj, land = double_well(1, c=1.0)
        cfg = SamplerConfig("LD", 0.01, 3.0, seed=21, max_steps=10**6)
        small = batch_hitting(obj, land.a1, Ball(land.a2, 0.2), cfg, 400)
        large = batch_hitting(obj, land.a1, Ball(land.a2, 0.2), cfg, 1600)
        assert small.stderr / large.stderr == pytest.approx(2.0, rel=0.2)

    def test_zero_noise_identical_paths(self):
        q = quadratic(np.eye(1))
        r = batch_hitting(q, [2.0], Ball([0.0], 0.01), SamplerConfig("LD", 0.1, math.inf), 5)
        assert r.stderr == 0.0
        assert np.all(r.steps == r.steps[0])

    def test_all_timeout(self):
        q = quadratic(np.eye(1))
        with pytest.raises(AllTimeoutError):
            batch_hitting(q, [2.0], Ball([50.0], 0.01), SamplerConfig("LD", 0.1, math.inf, max_steps=10), 3)

    def test_needs_two_paths(self):
        with pytest.raises(DomainError):
            batch_hitting(quadratic(np.eye(1)), [0.0], Ball([0.0], 1.0), SamplerConfig("LD", 0.1, 1.0), 1)
