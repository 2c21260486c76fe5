import math

import numpy as np
import pytest

from shadowlab.affine import (
    AffineSystem,
    TorusSystem,
    cat_map,
    neutral_counterexample,
    spectral_split,
)
from shadowlab.core import (
    Orbit,
    UnsupportedMapError,
    UsageError,
    Window,
    forward_orbit,
    orbit_through,
    verify_orbit,
)

GOLDEN = (1 + math.sqrt(5)) / 2


def backward_orbit(system, x0, steps):
    """Backward semi-orbit on [-steps, 0] through x0 (exact inverse)."""
    states = [np.asarray(x0, float)]
    for _ in range(steps):
        states.append(system.backward_sample(states[-1]))
    return Orbit(Window(-steps, 0), np.array(states[::-1]), map_id=system.map_id)


# ---------------------------------------------------------------------------
# spectral splitting


def test_split_diagonal_saddle():
    split = spectral_split(np.diag([2.0, 0.5]))
    assert split.unstable_dim == 1 and split.stable_dim == 1
    assert split.neutral_dim == 0 and split.kernel_dim == 0
    assert split.lambda_stable == pytest.approx(0.5)
    assert split.lambda_unstable == pytest.approx(2.0)
    assert abs(split.unstable_basis[:, 0] @ np.array([0, 1])) < 1e-12
    assert abs(split.stable_basis[:, 0] @ np.array([1, 0])) < 1e-12


def test_split_cat_matrix_against_eigen_oracle():
    A = np.array([[2.0, 1.0], [1.0, 1.0]])
    split = spectral_split(A)
    # characteristic polynomial oracle: x^2 - 3x + 1
    lam_u = (3 + math.sqrt(5)) / 2
    lam_s = (3 - math.sqrt(5)) / 2
    assert split.lambda_unstable == pytest.approx(lam_u, abs=1e-12)
    assert split.lambda_stable == pytest.approx(lam_s, abs=1e-12)
    v = split.unstable_basis[:, 0]
    assert np.linalg.norm(A @ v - lam_u * v) < 1e-10
    # unstable direction along (1, (sqrt(5)-1)/2)
    direction = np.array([1.0, (math.sqrt(5) - 1) / 2])
    direction /= np.linalg.norm(direction)
    assert min(np.linalg.norm(v - direction), np.linalg.norm(v + direction)) < 1e-10


def test_split_rotation_all_neutral():
    split = spectral_split(np.array([[0.0, -1.0], [1.0, 0.0]]))
    assert split.neutral_dim == 2
    assert split.stable_dim == split.unstable_dim == split.kernel_dim == 0


def test_split_rank_deficient():
    split = spectral_split(np.diag([2.0, 0.0]))
    assert split.kernel_dim == 1 and split.unstable_dim == 1


def test_split_rejects_bad_input():
    with pytest.raises(UsageError):
        spectral_split(np.array([[np.nan, 0], [0, 1.0]]))
    with pytest.raises(UsageError):
        spectral_split(np.eye(2), tol=0.7)


def test_split_growth_inequalities():
    # every stable basis vector obeys ||A^n v|| <= C lam_s^n, unstable the
    # inverse; iterates are tracked inside the invariant subspace because the
    # full matrix amplifies float noise from the complementary directions
    rng = np.random.default_rng(5)
    for _ in range(10):
        A = rng.normal(size=(3, 3))
        split = spectral_split(A)
        assert split.kernel_dim + split.stable_dim + split.unstable_dim \
            + split.neutral_dim == 3
        C = split.transient_factor
        scale = np.linalg.norm(A)
        if split.stable_dim:
            Bs = split.stable_basis
            Ms = Bs.T @ A @ Bs
            assert np.linalg.norm(A @ Bs - Bs @ Ms) < 1e-10 * scale
            for j in range(split.stable_dim):
                c = np.eye(split.stable_dim)[j]
                for n in range(1, 31):
                    c = Ms @ c
                    assert np.linalg.norm(Bs @ c) <= C * split.lambda_stable ** n + 1e-9
        if split.unstable_dim:
            Bu = split.unstable_basis
            Mu = Bu.T @ A @ Bu
            assert np.linalg.norm(A @ Bu - Bu @ Mu) < 1e-10 * scale
            Mu_inv = np.linalg.inv(Mu)
            for j in range(split.unstable_dim):
                c = np.eye(split.unstable_dim)[j]
                for n in range(1, 31):
                    c = Mu_inv @ c
                    assert np.linalg.norm(Bu @ c) <= \
                        C * split.lambda_unstable ** (-n) + 1e-9


# ---------------------------------------------------------------------------
# affine gluing


def test_glue_diagonal_saddle_hand_values():
    system = AffineSystem(np.diag([2.0, 0.5]))
    n = 12
    x = Orbit(Window(-n, 0), np.zeros((n + 1, 2)), map_id=system.map_id)
    y = forward_orbit(system, [1.0, 1.0], n)
    cert = system.glue(x, y)
    assert cert.satisfied and cert.strong
    # z0 = (1, 0); backward error 2^-k against x, forward 2^-k against y
    assert np.allclose(cert.z.state(0), [1.0, 0.0], atol=1e-12)
    for k in range(1, n + 1):
        assert cert.error_at(-k) == pytest.approx(2.0 ** (-k), rel=1e-9)
        assert cert.error_at(k) == pytest.approx(2.0 ** (-k), rel=1e-9)
    assert verify_orbit(system, cert.z) <= system.forward_tol


def test_glue_orbit_to_itself_is_exact():
    system = AffineSystem([[2.0, 1.0], [1.0, 1.0]], offset=[0.3, -0.1])
    y = forward_orbit(system, [0.02, -0.03], 10)
    x = backward_orbit(system, [0.02, -0.03], 10)
    cert = system.glue(x, y)
    assert cert.satisfied
    assert float(cert.backward_errors.max()) < 1e-9
    assert float(cert.forward_errors.max()) < 1e-9


def test_glue_expanding_sets_z0_to_y0():
    system = AffineSystem(np.diag([2.0, 3.0]))
    x = Orbit(Window(-8, 0), np.zeros((9, 2)), map_id=system.map_id)
    y = forward_orbit(system, [0.2, -0.4], 8)
    cert = system.glue(x, y)
    assert np.array_equal(cert.z.state(0), y.state(0))
    assert float(cert.forward_errors.max()) == 0.0
    assert cert.satisfied


def test_glue_contracting_follows_x():
    system = AffineSystem(np.diag([0.5, 0.25]))
    x = Orbit(Window(-6, 0), np.full((7, 2), 0.7), map_id="")
    # x is not an orbit of this map, but gluing only reads its states;
    # use the fixed point orbit instead for honesty
    fix = np.zeros(2)
    x = Orbit(Window(-6, 0), np.tile(fix, (7, 1)), map_id=system.map_id)
    y = forward_orbit(system, [1.0, 1.0], 6)
    cert = system.glue(x, y)
    assert np.array_equal(cert.z.state(0), fix)
    assert float(cert.backward_errors.max()) == 0.0
    for k in range(1, 7):
        assert cert.error_at(k) <= cert.bound_at(k) + 1e-12
    assert cert.satisfied


def test_glue_rank_deficient_targets_reachable_part():
    # A = diag(2, 0): kernel e2, unstable e1; two-step hand computation
    system = AffineSystem(np.diag([2.0, 0.0]))
    x = Orbit(Window(-4, 0), np.zeros((5, 2)), map_id=system.map_id)
    y = forward_orbit(system, [0.25, 0.8], 4)
    cert = system.glue(x, y)
    # y1 = (0.5, 0); z0 must hit it after one step: z0 = (0.25, 0)
    assert np.allclose(cert.z.state(0), [0.25, 0.0], atol=1e-12)
    assert np.allclose(cert.z.state(1), y.state(1), atol=1e-14)
    for k in range(1, 5):
        assert cert.error_at(k) == pytest.approx(0.0, abs=1e-13)
    assert cert.satisfied
    assert verify_orbit(system, cert.z) <= system.forward_tol


def test_glue_mixed_kernel_stable_unstable():
    # all three relevant subspaces at once: the construction targets y1
    system = AffineSystem(np.diag([2.0, 0.5, 0.0]))
    x = Orbit(Window(-6, 0), np.zeros((7, 3)), map_id=system.map_id)
    y = forward_orbit(system, [0.5, 0.8, 0.6], 6)
    cert = system.glue(x, y)
    assert cert.satisfied, f"slack {cert.worst_slack}"
    assert verify_orbit(system, cert.z) <= system.forward_tol
    # forward errors decay at the stable rate from step 1 on
    for k in range(1, 7):
        assert cert.error_at(k) <= 0.8 * 0.5 ** (k - 1) + 1e-12
    # backward errors decay at the unstable rate
    for k in range(1, 7):
        assert cert.error_at(-k) <= cert.bound_at(-k) + 1e-12


def test_glue_neutral_rejected():
    system_matrix = np.array([[0.0, -1.0], [1.0, 0.0]])
    with pytest.raises(UnsupportedMapError):
        AffineSystem(system_matrix).rate(4)
    system = AffineSystem(system_matrix)
    x = Orbit(Window(-3, 0), np.zeros((4, 2)), map_id=system.map_id)
    y = forward_orbit(system, [0.1, 0.1], 3)
    with pytest.raises(UnsupportedMapError):
        system.glue(x, y)


def test_glue_random_pairs_respect_certificate():
    rng = np.random.default_rng(11)
    system = AffineSystem([[2.0, 1.0], [1.0, 1.0]], offset=[0.1, 0.2])
    split = system.split
    fix = np.linalg.solve(np.eye(2) - system.A, system.offset)
    n = 25
    for _ in range(20):
        # anchored pairs: backward-bounded x, forward-bounded y
        xu = fix + split.unstable_basis[:, 0] * rng.uniform(-1, 1)
        ys = fix + split.stable_basis[:, 0] * rng.uniform(-1, 1)
        x = backward_orbit(system, xu, n)
        y = forward_orbit(system, ys, n)
        cert = system.glue(x, y)
        assert cert.satisfied, f"slack {cert.worst_slack}"
        assert verify_orbit(system, cert.z) <= 10 * system.forward_tol


def test_time_shift_equivariance():
    # the same junction glued at a different absolute time yields the same
    # states: the construction reads only the state arrays, so relabeling the
    # window indices around the junction is invisible to the output
    system = AffineSystem([[2.0, 1.0], [1.0, 1.0]], offset=[0.05, 0.0])
    fix = np.linalg.solve(np.eye(2) - system.A, system.offset)
    x0 = fix + system.split.unstable_basis[:, 0] * 0.4
    y0 = fix + system.split.stable_basis[:, 0] * 0.7
    x = backward_orbit(system, x0, 10)
    y = forward_orbit(system, y0, 10)
    cert0 = system.glue(x, y)
    # relabel: the junction now sits 4 steps in the past of the gluing window
    x_short = Orbit(Window(-6, 0), x.states[4:], map_id=system.map_id)
    cert_shifted = system.glue(x_short, y)
    assert np.allclose(cert_shifted.z.states, cert0.z.states[4:], atol=1e-13)
    assert np.allclose(cert_shifted.backward_errors, cert0.backward_errors[4:],
                       atol=1e-13)


def test_one_dimensional_affine_supported():
    system = AffineSystem(np.array([[2.0]]), offset=np.array([0.5]))
    assert system.split.unstable_dim == 1
    x = Orbit(Window(-10, 0), np.full((11, 1), -0.5), map_id=system.map_id)  # fixed point
    y = forward_orbit(system, np.array([0.25]), 10)
    cert = system.glue(x, y)
    assert cert.satisfied
    assert np.array_equal(cert.z.state(0), y.state(0))
    for k in range(1, 11):
        assert cert.error_at(-k) == pytest.approx(0.75 * 2.0 ** (-k), rel=1e-12)


# ---------------------------------------------------------------------------
# neutral counterexample


def test_neutral_counterexample_rotation_grid_search():
    system = AffineSystem(np.array([[0.0, -1.0], [1.0, 0.0]]))
    x = Orbit(Window.centered(16), np.zeros((33, 2)), map_id=system.map_id)
    eps = 0.1
    y = neutral_counterexample(system.split, system, x, eps)
    assert np.linalg.norm(np.asarray(y.state(0)) - np.asarray(x.state(0))) == \
        pytest.approx(eps, rel=1e-12)
    assert verify_orbit(system, y) <= system.forward_tol

    # no candidate z0 on a grid achieves small backward AND forward tail errors
    grid = np.linspace(-1.0, 1.0, 101)
    zz = np.array([[a, b] for a in grid for b in grid])
    best = np.inf
    for k in range(1, 17):
        rot = np.linalg.matrix_power(system.A, k)
        # rotation is an isometry: tail errors are constant in k
    back_tail = np.linalg.norm(zz - np.asarray(x.state(0)), axis=1)
    fwd_tail = np.linalg.norm(zz - np.asarray(y.state(0)), axis=1)
    joint = np.maximum(back_tail, fwd_tail)
    assert joint.min() >= eps / 2 - 1e-12


def test_neutral_counterexample_zero_offset():
    system = AffineSystem(np.eye(2))
    x = Orbit(Window.centered(4), np.ones((9, 2)) * 0.3, map_id=system.map_id)
    y = neutral_counterexample(system.split, system, x, 0.0)
    assert np.allclose(y.states, x.states)


def test_neutral_counterexample_requires_neutral_part():
    system = AffineSystem(np.diag([2.0, 0.5]))
    x = Orbit(Window.centered(4), np.zeros((9, 2)), map_id=system.map_id)
    with pytest.raises(UsageError):
        neutral_counterexample(system.split, system, x, 0.1)


# ---------------------------------------------------------------------------
# torus automorphisms


def test_torus_requires_unimodular_hyperbolic():
    with pytest.raises(UsageError):
        TorusSystem([[2, 0], [0, 2]])
    with pytest.raises(UnsupportedMapError):
        TorusSystem([[0, -1], [1, 0]])


def test_torus_forward_and_metric():
    system = cat_map()
    assert np.allclose(system.forward([0.0, 0.0]), [0.0, 0.0])
    p = system.forward([0.4, 0.7])
    assert np.allclose(p, [(0.4 * 2 + 0.7) % 1, (0.4 + 0.7) % 1])
    # metric is invariant under integer translations of representatives
    a, b = np.array([0.1, 0.95]), np.array([0.9, 0.02])
    assert system.metric(a, b) == pytest.approx(system.metric(a + 1.0 - 1.0, b))
    assert system.metric(a, b) == pytest.approx(
        system.metric_many(a[None, :], b[None, :])[0])
    assert system.metric(a, a) == 0.0


def test_torus_expansion_constant():
    system = cat_map()
    assert system.expansion == pytest.approx((3 + math.sqrt(5)) / 2, abs=1e-12)
    assert system.log_expansion == pytest.approx(math.log((3 + math.sqrt(5)) / 2))


def test_torus_glue_identical_orbits():
    system = cat_map()
    rng = np.random.default_rng(0)
    x0 = rng.uniform(size=2)
    x = orbit_through(system, x0, Window(-10, 0))
    y = forward_orbit(system, x0, 10)
    cert = system.glue(Orbit(Window(-10, 0), x.states, map_id=system.map_id), y)
    assert float(cert.backward_errors.max()) < 1e-12
    assert float(cert.forward_errors.max()) < 1e-12


def test_torus_glue_along_unstable_line_is_exact():
    system = cat_map()
    eu = system.basis[:, 0]
    y0 = (np.zeros(2) + 0.01 * eu) % 1.0
    x = Orbit(Window(-12, 0), np.zeros((13, 2)), map_id=system.map_id)
    y = forward_orbit(system, y0, 12)
    cert = system.glue(x, y)
    # y already lies on the unstable line through x0, so z = y
    assert float(cert.forward_errors.max()) < 1e-12
    assert system.metric(cert.z.state(0), y0) < 1e-12


def test_torus_glue_generic_pair_decays_at_rate():
    system = cat_map()
    n = 30
    x = Orbit(Window(-n, 0), np.zeros((n + 1, 2)), map_id=system.map_id)
    y = orbit_through(system, [0.3, 0.7], Window.forward(n))
    y = Orbit(Window.forward(n), y.states, map_id=system.map_id)
    cert = system.glue(x, y)
    assert cert.satisfied
    lam = system.log_expansion
    scale = cert.scale
    for k in range(1, n + 1):
        assert cert.error_at(-k) <= math.exp(-lam * k) * scale + 1e-12
        assert cert.error_at(k) <= math.exp(-lam * k) * scale + 1e-12
    assert verify_orbit(system, cert.z) <= 1e-7


def test_torus_glue_translation_invariance():
    system = cat_map()
    n = 8
    rng = np.random.default_rng(3)
    x0 = rng.uniform(size=2)
    y0 = rng.uniform(size=2)
    x = orbit_through(system, x0, Window(-n, 0))
    y = forward_orbit(system, y0, n)
    cert = system.glue(x, y)
    # shifting the representatives by integers must not change the errors
    x_shift = Orbit(x.window, x.states, map_id=system.map_id)
    y_shift = forward_orbit(system, (np.asarray(y0) + 1.0) % 1.0, n)
    cert2 = system.glue(x_shift, y_shift)
    assert np.allclose(cert.backward_errors, cert2.backward_errors, atol=1e-12)
    assert np.allclose(cert.forward_errors, cert2.forward_errors, atol=1e-12)
