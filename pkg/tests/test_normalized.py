import json
import math

import numpy as np
import pytest

from conftest import box_oracle, random_measure
from ggmink.density import Params
from ggmink.errors import DomainError, InadmissibleParamsError, PreconditionError
from ggmink.geometry import circle_grid, fibonacci_grid, hausdorff_distance, support_function
from ggmink.measures import gauss_volume, weighted_surface_measure
from ggmink.normalized import (DiscreteMeasure, InconsistentMultiplierError, check_not_concentrated,
                               problem_from_json, recover_multiplier, solve_normalized,
                               solve_normalized_even)

G2 = Params(2, 2.0, 0.0, 1.0)
BOX_MU = DiscreteMeasure(np.array([[1.0, 0], [-1, 0], [0, 1], [0, -1]]), [2.0, 2.0, 1.0, 1.0], even=True)


def test_concentration_examples():
    assert check_not_concentrated(BOX_MU)[0]
    half = DiscreteMeasure(np.array([[1.0, 0], [0, 1], [0, -1], [0.6, 0.8]]), np.ones(4))
    ok, u = check_not_concentrated(half)
    assert not ok and np.allclose(u, [-1, 0])
    eq = DiscreteMeasure(np.array([[1.0, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]]), np.ones(4), even=True)
    ok, u = check_not_concentrated(eq, "GreatSubsphere")
    assert not ok and np.allclose(np.abs(u), [0, 0, 1])
    assert check_not_concentrated(DiscreteMeasure(np.vstack([np.eye(3), -np.eye(3)]), np.ones(6)),
                                  "GreatSubsphere")[0]


def test_concentration_witness_is_valid():
    rng = np.random.default_rng(0)
    for _ in range(50):
        u0 = rng.normal(size=3)
        u0 /= np.linalg.norm(u0)
        v = rng.normal(size=(8, 3))
        v -= np.outer(np.minimum(v @ u0, 0) * 2, u0)  # reflect into {v . u0 >= 0}
        v /= np.linalg.norm(v, axis=1)[:, None]
        ok, w = check_not_concentrated(DiscreteMeasure(v, np.ones(8)))
        assert not ok
        assert np.all(v @ w <= 1e-10)


def test_measure_validation():
    with pytest.raises(DomainError):
        DiscreteMeasure(np.array([[1.0, 0]]), [-1.0])
    with pytest.raises(DomainError):
        DiscreteMeasure(np.array([[2.0, 0]]), [1.0])
    with pytest.raises(DomainError):
        DiscreteMeasure(np.array([[1.0, 0], [-1, 0]]), [1.0, 2.0], even=True)


def test_uniform_measure_gives_regular_polygon():
    mu = DiscreteMeasure(circle_grid(16), np.ones(16))
    sol = solve_normalized(G2, mu, 0.6)
    assert np.ptp(sol.support_numbers) <= 1e-12
    assert sol.body.num_facets == 16
    S = weighted_surface_measure(G2, sol.body).weights
    assert np.max(np.abs(S / S.sum() - 1 / 16)) <= 1e-6
    assert abs(sol.volume - 0.6) <= 1e-7
    assert recover_multiplier(sol, mu, G2) == pytest.approx(S.sum() / 16, rel=1e-12)


@pytest.mark.parametrize("c", [0.5, 0.55, 0.8])
def test_box_oracle(c):
    sol = solve_normalized(G2, BOX_MU, c)
    a, b = box_oracle(c)
    assert np.allclose(sol.support_numbers, [a, a, b, b], atol=1e-4)
    assert a < b
    assert sol.first_order_residual <= 1e-5
    assert abs(sol.volume - c) <= 1e-7


def test_multiplier_homogeneity():
    sol1 = solve_normalized(G2, BOX_MU, 0.6)
    sol2 = solve_normalized(G2, BOX_MU.scaled(2.0), 0.6)
    assert recover_multiplier(sol2, BOX_MU.scaled(2.0), G2) == pytest.approx(
        recover_multiplier(sol1, BOX_MU, G2) / 2, rel=1e-6)


def test_multiplier_inconsistency_detected():
    sol = solve_normalized(G2, BOX_MU, 0.6)
    other = DiscreteMeasure(BOX_MU.directions, [1.0, 1.0, 1.0, 1.0], even=True)
    with pytest.raises(InconsistentMultiplierError):
        recover_multiplier(sol, other, G2)


@pytest.mark.parametrize("seed", range(4))
def test_random_planar_measures(seed):
    mu = random_measure(seed)
    P = G2.with_p(1.0 + 0.5 * seed)
    sol = solve_normalized(P, mu, 0.6)
    assert sol.measure_residual <= 1e-5
    assert sol.projected_gradient_ratio <= 1e-6
    assert abs(gauss_volume(P, sol.body) - 0.6) <= 1e-7
    atoms = recover_multiplier(sol, mu, P)
    assert atoms > 0
    assert np.min(sol.support_numbers) > 1e-3
    phis = [row["objective"] for row in sol.log]
    assert all(b >= a - 1e-12 * abs(a) for a, b in zip(phis, phis[1:]))


def test_rotation_equivariance():
    mu = random_measure(11)
    ang = 0.7
    R = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
    a = solve_normalized(G2.with_p(2.0), mu, 0.7)
    b = solve_normalized(G2.with_p(2.0), mu.rotated(R), 0.7)
    assert hausdorff_distance(a.body.rotated(R), b.body) <= 1e-6


def test_three_dimensional_measure():
    rng = np.random.default_rng(5)
    v = fibonacci_grid(20)
    mu = DiscreteMeasure(v, rng.uniform(0.5, 2.0, 20))
    P = Params(3, 1.5, 0.1, 1.5)
    sol = solve_normalized(P, mu, 0.65)
    assert sol.measure_residual <= 1e-5
    assert abs(sol.volume - 0.65) <= 1e-7


def test_normalized_preconditions():
    with pytest.raises(DomainError):
        solve_normalized(G2, BOX_MU, 1.0)
    with pytest.raises(DomainError):
        solve_normalized(G2.with_p(-1.0), BOX_MU, 0.6)
    asym = random_measure(3)
    with pytest.raises(PreconditionError):
        solve_normalized(G2, asym, 0.3)
    half = DiscreteMeasure(np.array([[1.0, 0], [0, 1], [0, -1]]), np.ones(3))
    with pytest.raises(PreconditionError):
        solve_normalized(G2, half, 0.6)


def test_even_measure_below_half_allowed():
    sol = solve_normalized(G2, BOX_MU, 0.3)
    assert abs(sol.volume - 0.3) <= 1e-7
    assert sol.measure_residual <= 1e-5


def test_even_negative_p_uniform():
    mu = DiscreteMeasure(circle_grid(16), np.ones(16), even=True)
    sol = solve_normalized_even(Params(2, 2.0, 0.0, -1.0), mu, 0.3)
    assert np.ptp(sol.support_numbers) <= 1e-12
    assert abs(sol.volume - 0.3) <= 1e-7


def test_even_negative_p_box_oracle():
    P = Params(2, 2.0, 0.0, -1.0)
    sol = solve_normalized_even(P, BOX_MU, 0.4)
    a, b = box_oracle(0.4, p=-1.0)
    assert np.allclose(sol.support_numbers, [a, a, b, b], atol=1e-4)


def test_even_refusals():
    with pytest.raises(InadmissibleParamsError) as info:
        solve_normalized_even(Params(2, 2.0, 0.6, -1.0), BOX_MU, 0.3)
    assert "alpha/q - alpha < p < 0" in str(info.value)
    assert isinstance(info.value, DomainError) and info.value.exit_code == 3
    eq = DiscreteMeasure(np.array([[1.0, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]]), np.ones(4), even=True)
    with pytest.raises(PreconditionError):
        solve_normalized_even(Params(3, 2.0, 0.0, -1.0), eq, 0.3)
    with pytest.raises(PreconditionError):
        solve_normalized_even(Params(2, 2.0, 0.0, -1.0), random_measure(1), 0.3)


def test_problem_json_roundtrip():
    text = json.dumps({"params": {"n": 2, "alpha": 2, "q": 0, "p": 1}, "measure": BOX_MU.to_dict(), "c": 0.55})
    P, mu, c = problem_from_json(text)
    assert P == G2 and c == 0.55 and mu.even
    assert np.allclose(mu.weights, BOX_MU.weights)
    with pytest.raises(DomainError):
        problem_from_json('{"params": {"n": 2}}')


def test_solution_serializes():
    sol = solve_normalized(G2, BOX_MU, 0.55)
    data = json.loads(json.dumps(sol.to_dict(G2)))
    assert data["body"]["facets"] and data["multiplier"] > 0
    assert support_function(sol.body, np.array([1.0, 0.0])) == pytest.approx(sol.support_numbers[0])


def test_near_duplicate_atoms_stop_at_round_off():
    # two atoms 0.55 degrees apart make the projected-gradient test unattainable in double precision
    mu = random_measure(114)
    sol = solve_normalized(G2, mu, 0.75)
    assert sol.measure_residual <= 1e-5
    assert abs(sol.volume - 0.75) <= 1e-7
    assert sol.iterations < 100
    assert sol.log[-1]["stalled"]


def test_strongly_negative_p_falls_back_to_continuation():
    # at p = -5 the direct solve escapes toward a strip; the solution has two far facets
    rng = np.random.default_rng(312)
    k = int(rng.integers(3, 8))
    th = rng.uniform(0, np.pi, k)
    w = rng.uniform(0.3, 3.0, k)
    half = np.column_stack([np.cos(th), np.sin(th)])
    mu = DiscreteMeasure(np.vstack([half, -half]), np.r_[w, w], even=True)
    sol = solve_normalized_even(Params(2, 2.0, -0.5, -5.0), mu, 0.3)
    assert sol.measure_residual <= 1e-5
    assert abs(sol.volume - 0.3) <= 1e-7
    assert sol.log[-1].get("continued") or sol.log[-1].get("polished")
