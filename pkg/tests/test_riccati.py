import numpy as np
import pytest

from minmaxlq._errors import NotPositiveDefiniteError
from minmaxlq.discretize import DiscretizedPlant, discretize_problem
from minmaxlq.riccati import ExtendedSystem, backward_riccati, check_simplex, extend, objective
from minmaxlq.simulate import plant_costs, single_model_optimal
from minmaxlq.solver import extract_control

from oracles import batch_qp, random_problem, random_simplex, textbook_lq


def _scalar_plant(**over):
    base = dict(Phi=[[[1.0]]], Gamma=[[[1.0]]], Pi=[[[1.0]]], Theta=[[[0.0]]], Psi=[[[1.0]]], G=[[0.0]])
    base.update(over)
    return DiscretizedPlant("s", [0.0, 1.0], base["G"], base["Phi"], base["Gamma"], base["Pi"], base["Theta"], base["Psi"])


def test_scalar_hand_computation():
    sol = backward_riccati(extend([_scalar_plant()], [1.0]))
    assert sol.P[1, 0, 0] == 0.0
    assert sol.K[0, 0, 0] == 0.0
    assert sol.P[0, 0, 0] == 1.0
    assert extract_control(sol, extend([_scalar_plant()], [1.0]), [1.0])[0, 0] == 0.0


def test_singleton_extension_is_identity(ex1_disc):
    ext = extend(ex1_disc[:1], [1.0])
    p = ex1_disc[0]
    for a, b in ((ext.Pi, p.Pi), (ext.Theta, p.Theta), (ext.Psi, p.Psi), (ext.Phi, p.Phi), (ext.Gamma, p.Gamma)):
        np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(ext.G, p.G)


def test_identical_plants_psi(ex1_disc):
    ext = extend([ex1_disc[0], ex1_disc[0]], [0.5, 0.5])
    np.testing.assert_allclose(ext.Psi, ex1_disc[0].Psi, rtol=1e-15)


def test_example1_block_layout(ex1_disc):
    ext = extend(ex1_disc, [1.0, 0.0])
    assert not ext.Pi[:, 2:, 2:].any()
    assert not ext.G[2:, 2:].any()
    np.testing.assert_array_equal(ext.Psi, ex1_disc[0].Psi)
    # off-diagonal blocks are structurally zero
    assert not ext.Phi[:, :2, 2:].any() and not ext.Phi[:, 2:, :2].any()
    np.testing.assert_array_equal(ext.Gamma[:, 2:], ex1_disc[1].Gamma)


def test_singleton_gains_match_textbook(ex1_disc):
    p = ex1_disc[0]
    sol = backward_riccati(extend([p], [1.0]))
    P, K = textbook_lq(p.Phi, p.Gamma, p.Pi, p.Theta, p.Psi, p.G)
    assert np.abs(sol.K - K).max() <= 1e-10 * max(1.0, np.abs(K).max())
    assert np.abs(sol.P - P).max() <= 1e-10 * np.abs(P).max()


def test_zero_weights_give_zero_value():
    p = _scalar_plant(Pi=[[[0.0]]], G=[[0.0]])
    sol = backward_riccati(extend([p], [1.0]))
    assert not sol.P.any() and not sol.K.any()


def test_objective_zero_state(ex1):
    zero = ex1.subproblem(x0=np.zeros(2))
    for mu in ([1, 0], [0.3, 0.7]):
        assert objective(zero, mu) == 0.0


def test_example1_objective_values(ex1, ex1_disc):
    assert objective(ex1, [1.0, 0.0], ex1_disc) == pytest.approx(139.1381, rel=5e-3)
    _, own_cost = single_model_optimal(ex1, "2", ex1_disc)
    assert objective(ex1, [0.0, 1.0], ex1_disc) == pytest.approx(own_cost, rel=1e-10)


def test_value_matches_batch_qp(rng):
    for _ in range(10):
        problem = random_problem(rng)
        disc = discretize_problem(problem)
        mu = random_simplex(rng, len(disc))
        V_ref, value_ref = batch_qp(disc, mu, problem.x0)
        system = ExtendedSystem(disc)
        assert system.value(mu, problem.x0) == pytest.approx(value_ref, rel=1e-9, abs=1e-12)
        V = extract_control(system.solve(mu), system.extend(mu), problem.x0)
        np.testing.assert_allclose(V, V_ref, rtol=1e-7, atol=1e-9 * max(1.0, np.abs(V_ref).max()))


def test_psd_and_symmetric_on_random_problems():
    """50 simplex weight vectors on each of 10 random problems."""
    rng = np.random.default_rng(5)
    for _ in range(10):
        problem = random_problem(rng)
        system = ExtendedSystem(discretize_problem(problem))
        for _ in range(50):
            sol = system.solve(random_simplex(rng, system.size))
            for P in sol.P:
                scale = np.linalg.norm(P, 2)
                assert np.abs(P - P.T).max() <= 1e-10 * max(scale, 1e-300)
                assert np.linalg.eigvalsh(P).min() >= -1e-9 * scale


def test_concave_midpoints():
    """100 random pairs over random problems; midpoint value above the chord."""
    rng = np.random.default_rng(11)
    systems = [(ExtendedSystem(discretize_problem(p)), p.x0) for p in (random_problem(rng, plants=3) for _ in range(5))]
    for i in range(100):
        system, x0 = systems[i % len(systems)]
        a, b = random_simplex(rng, system.size), random_simplex(rng, system.size)
        fa, fb, fm = system.value(a, x0), system.value(b, x0), system.value(0.5 * (a + b), x0)
        assert fm >= 0.5 * (fa + fb) - 1e-10 * max(1.0, abs(fm))


def test_cost_identity():
    """1/2 x0'P0 x0 equals the weighted sum of per-plant costs (50 random cases)."""
    rng = np.random.default_rng(3)
    for _ in range(50):
        problem = random_problem(rng)
        disc = discretize_problem(problem)
        system = ExtendedSystem(disc)
        mu = random_simplex(rng, system.size)
        V = extract_control(system.solve(mu), system.extend(mu), problem.x0)
        weighted = float(mu @ plant_costs(disc, V, problem.x0))
        value = system.value(mu, problem.x0)
        assert abs(value - weighted) <= 1e-8 * max(abs(value), 1e-300)


def test_monotone_in_terminal_weight(rng):
    for _ in range(5):
        problem = random_problem(rng)
        L = rng.normal(size=(problem.n, problem.n))
        heavier = problem.__class__(
            problem.plants, problem.cost.__class__(problem.cost.G + L @ L.T, problem.cost.Q, problem.cost.R),
            problem.x0, problem.delta, problem.params,
        )
        mu = random_simplex(rng, len(problem.plants))
        assert objective(heavier, mu) >= objective(problem, mu) - 1e-12


def test_indefinite_inner_matrix_raises(ex1_disc):
    with pytest.raises(NotPositiveDefiniteError):
        ExtendedSystem(ex1_disc).value([-1.0, 0.0], [3.0, -2.0])


def test_check_simplex():
    check_simplex([0.2, 0.8])
    with pytest.raises(ValueError):
        check_simplex([0.5, 0.6])
    with pytest.raises(ValueError):
        check_simplex([1.1, -0.1])
    with pytest.raises(ValueError):
        check_simplex([1.0], size=2)


def test_dimension_mismatch(ex1_disc):
    with pytest.raises(ValueError):
        extend(ex1_disc, [1.0])
