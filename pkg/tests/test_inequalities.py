import json
import math

import numpy as np
import pytest

from ggmink.density import Params, ball_mass
from ggmink.errors import DomainError, PreconditionError
from ggmink.geometry import Polytope, SupportVector, circle_grid, wulff_shape
from ggmink.inequalities import (DefectReport, ball_perimeter_at_half, check_brunn_minkowski, check_divergence,
                                 check_gtilde, check_lp_isoperimetric, default_param_grid, estimate_half_profile,
                                 random_symmetric_body, run_suite, suite_from_config, threshold_report,
                                 weak_convergence_check, weighted_perimeter_at_half)

GAUSS2 = Params(2, 2.0, 0.0, 1.0)


def test_report_bookkeeping():
    rep = DefectReport("x", 1e-6)
    rep.add(0.5, tag=1)
    rep.add(-1e-7, tag=2)
    assert rep.ok
    rep.add(-1e-3, tag=3)
    assert not rep.ok
    assert rep.trials == 3
    assert rep.min_defect == -1e-3
    assert rep.violations == [{"tag": 3, "defect": -1e-3}]
    other = DefectReport("x", 1e-6)
    other.add(2.0, tag=4)
    other.extra["max_gap"] = 5.0
    rep.merge(other)
    assert rep.trials == 4 and rep.extra["max_gap"] == 5.0
    assert json.loads(rep.to_json())["trials"] == 4
    assert rep.to_csv().splitlines()[0] == "defect,tag"


def test_random_body_is_seeded_and_even():
    a = random_symmetric_body(7, 2, m=64)
    b = random_symmetric_body(7, 2, m=64)
    assert np.array_equal(a.values, b.values)
    assert np.allclose(a.values, np.roll(a.values, 32), rtol=1e-12)
    assert not np.array_equal(a.values, random_symmetric_body(8, 2, m=64).values)


@pytest.mark.parametrize("params", default_param_grid(2)[::3])
def test_brunn_minkowski_on_random_pairs(params):
    for s in range(3):
        K = random_symmetric_body(s, 2, m=128)
        L = random_symmetric_body(s + 100, 2, m=128)
        rep = check_brunn_minkowski(params, K, L)
        assert rep.ok, rep.violations
        assert rep.trials == 9


def test_brunn_minkowski_defect_vanishes_for_equal_bodies():
    # for K = L the combination is K itself and every defect vanishes
    K = random_symmetric_body(3, 2, m=64)
    rep = check_brunn_minkowski(GAUSS2, K, K)
    assert max(abs(r["defect"]) for r in rep.records) < 1e-12


def test_brunn_minkowski_in_space():
    params = Params(3, 2.0, 0.0, 1.0)
    K = random_symmetric_body(1, 3, m=48)
    L = random_symmetric_body(2, 3, m=48)
    rep = check_brunn_minkowski(params, K, L, lambdas=(0.0, 0.5, 1.0))
    assert rep.ok


def test_brunn_minkowski_preconditions():
    K = random_symmetric_body(0, 2, m=32)
    with pytest.raises(PreconditionError):
        check_brunn_minkowski(Params(2, 2.0, 0.6, 1.0), K, K)
    grid = circle_grid(32)
    shifted = SupportVector(grid, 1.0 + 0.3 * grid[:, 0])
    with pytest.raises(PreconditionError):
        check_brunn_minkowski(GAUSS2, shifted, K)


@pytest.mark.parametrize("p", [1.0, 1.5, 3.0])
def test_lp_isoperimetric_holds(p):
    K = wulff_shape(random_symmetric_body(5, 2, m=128))
    rep = check_lp_isoperimetric(GAUSS2.with_p(p), K)
    assert rep.ok


def test_lp_isoperimetric_is_equality_at_p_one():
    K = wulff_shape(random_symmetric_body(5, 2, m=128))
    rep = check_lp_isoperimetric(GAUSS2, K)
    assert abs(rep.min_defect) < 1e-12


def test_lp_isoperimetric_rejects_small_p():
    with pytest.raises(PreconditionError):
        check_lp_isoperimetric(GAUSS2.with_p(0.5), Polytope.box([1.0, 1.0]))


@pytest.mark.parametrize("params", [GAUSS2, Params(2, 1.0, -0.5, 1.0), Params(2, 2.0, 0.2, 1.0)])
def test_gtilde_comparison_and_routes(params):
    K = wulff_shape(random_symmetric_body(11, 2, m=256))
    rep = check_gtilde(params, K)
    assert rep.ok
    assert rep.extra["max_route_gap"] < 1e-6


def test_divergence_identity_on_box():
    rep = check_divergence(Params(2, 2.0, -0.5, 1.0), Polytope.box([0.7, 1.3]))
    assert rep.ok


def test_threshold_formula():
    assert threshold_report(GAUSS2, 2.0) == pytest.approx(2.0)
    assert threshold_report(Params(3, 2.0, 0.0, 2.0), 2.0) == pytest.approx(1.5**-1 * 4.0)
    with pytest.raises(DomainError):
        threshold_report(GAUSS2, -1.0)
    with pytest.raises(PreconditionError):
        threshold_report(GAUSS2.with_p(0.5), 1.0)


def test_half_mass_ball_perimeter_closed_form():
    # Gaussian plane: G(rB) = 1 - exp(-r^2/2) = 1/2 and |S(rB)| = r exp(-r^2/2)
    r = math.sqrt(2 * math.log(2))
    exact = r * 0.5
    assert ball_mass(GAUSS2, r) == pytest.approx(0.5, rel=1e-14)
    assert ball_perimeter_at_half(GAUSS2, m=1024) == pytest.approx(exact, rel=1e-4)


def test_half_profile_estimate_is_close_to_ball():
    est = estimate_half_profile(GAUSS2, trials=20, seed=0, m=256)
    ball = ball_perimeter_at_half(GAUSS2, m=256)
    assert est["estimate"] >= ball * (1 - 1e-6)
    assert est["estimate"] <= ball * 1.05
    assert "upper estimate" in est["label"]


def test_weighted_perimeter_is_scale_normalized():
    K = Polytope.box([1.0, 2.0])
    assert weighted_perimeter_at_half(GAUSS2, K) == pytest.approx(
        weighted_perimeter_at_half(GAUSS2, K.scaled(3.0)), rel=1e-10)


def test_weak_convergence_is_monotone_in_the_plane():
    res = weak_convergence_check(GAUSS2, sizes=(8, 32, 128, 512))
    assert res["monotone"]
    assert res["final_gap"] < 1e-4
    assert res["limit"] == pytest.approx(math.exp(-0.5) / (2 * math.pi) * 2 * math.pi * 1.5)


def test_weak_convergence_custom_test_function():
    res = weak_convergence_check(GAUSS2, test_fn=lambda u: np.exp(u[:, 1]), sizes=(16, 64, 256))
    assert res["monotone"]


def test_run_suite_is_deterministic():
    a = run_suite("gtilde", 2, trials=4, seed=3, grid=64)
    b = run_suite("gtilde", 2, trials=4, seed=3, grid=64)
    assert a.to_json() == b.to_json()
    assert a.ok and a.trials == 4


def test_suite_from_config():
    rep = suite_from_config({"suite": "lp-isoperimetric", "n": 2, "trials": 2, "grid": 64,
                             "params": [[2, 2.0, 0.0]], "p_values": [1.0, 2.0]})
    assert rep.trials == 4 and rep.ok
    with pytest.raises(DomainError):
        suite_from_config({"n": 2})
    with pytest.raises(DomainError):
        run_suite("nope", 2, 1)
