import math

import numpy as np
import pytest
from scipy import integrate
from scipy.optimize import brentq
from scipy.special import ndtr

from ggmink.density import Params


@pytest.fixture
def gauss2():
    return Params(2, 2.0, 0.0, 1.0)


@pytest.fixture
def gauss3():
    return Params(3, 2.0, 0.0, 1.0)


def sample_density(params, size, rng):
    """Draw |x| by inverting the ball-mass CDF on a fine radial table; direction uniform."""
    from ggmink.density import ball_mass, support_cutoff

    cut = support_cutoff(params)
    top = cut if cut is not None else 1.0
    while cut is None and ball_mass(params, top) < 1 - 1e-12:
        top *= 2.0
    r = np.concatenate([[0.0], np.geomspace(1e-6, top, 40000)])
    cdf = ball_mass(params, r)
    u = rng.uniform(size=size)
    radii = np.interp(u, cdf, r)
    d = rng.normal(size=(size, params.n))
    return d / np.linalg.norm(d, axis=1)[:, None] * radii[:, None]


def smooth_positive(grid, rng, scale=0.25):
    """exp of a random quadratic form plus linear term on the grid: smooth and positive."""
    n = grid.shape[1]
    A = rng.normal(0, scale, size=(n, n))
    b = rng.normal(0, scale, size=n)
    return np.exp(np.einsum("ij,jk,ik->i", grid, A, grid) + grid @ b)


def box_oracle(c, w1=2.0, w2=1.0, p=1.0):
    """Half-widths (a, b) of the Gaussian box optimum: G = c and S_p(e1)/S_p(e2) = w1/w2.

    The side masses of [-a,a]x[-b,b] are phi(a)(2Phi(b)-1) and phi(b)(2Phi(a)-1),
    weighted by a^(1-p) and b^(1-p).
    """
    def b_of(a):
        return brentq(lambda b: (2 * ndtr(a) - 1) * (2 * ndtr(b) - 1) - c, 1e-9, 50, xtol=1e-15)

    def ratio(a):
        b = b_of(a)
        pa, pb = math.exp(-a * a / 2), math.exp(-b * b / 2)
        return (a / b) ** (1 - p) * pa * (2 * ndtr(b) - 1) / (pb * (2 * ndtr(a) - 1)) - w1 / w2

    a_min = brentq(lambda a: 2 * ndtr(a) - 1 - c, 1e-9, 50) * (1 + 1e-9)
    a = brentq(ratio, a_min, 20, xtol=1e-15)
    return a, b_of(a)


def random_measure(seed, k=None):
    from ggmink.normalized import DiscreteMeasure, check_not_concentrated

    rng = np.random.default_rng(seed)
    while True:
        k = k or int(rng.integers(5, 14))
        th = np.sort(rng.uniform(0, 2 * np.pi, k))
        mu = DiscreteMeasure(np.c_[np.cos(th), np.sin(th)], rng.uniform(0.3, 3.0, k))
        if check_not_concentrated(mu)[0]:
            return mu


def radial_quad_normalizer(params):
    """sigma_{n-1} int_0^R bracket(r) r^(n-1) dr by adaptive quadrature (oracle).

    For q > 0 the endpoint factor (cutoff - r)^exponent is handed to QUADPACK
    as an algebraic weight so the integrand it sees is smooth.
    """
    from ggmink.density import bracket, sphere_area, support_cutoff

    n = params.n
    cut = support_cutoff(params)
    if cut is None:
        val = integrate.quad(lambda r: float(bracket(params, r)) * r ** (n - 1), 0, np.inf,
                             limit=400, epsabs=0, epsrel=1e-12)[0]
    else:
        e, a = params.exponent, params.alpha

        def smooth(r):
            # bracket / (cut - r)^e = cut^-e [(1 - (r/cut)^a) / (1 - r/cut)]^e, ratio -> a at the cutoff
            s = r / cut
            ratio = (1 - s**a) / (1 - s) if s < 1 - 1e-9 else a
            return cut ** (-e) * ratio**e * r ** (n - 1)

        val = integrate.quad(smooth, 0, cut, weight="alg", wvar=(0.0, e), limit=400, epsabs=0, epsrel=1e-12)[0]
    return sphere_area(n) * val


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance criteria run at their stated tolerances")
