"""Large-N limits: variational partition-function density, homophily closed
forms, the dilogarithm, and the link-density / neighbor-distance functionals.

The central object is the limit of (log Z)/N^2: a per-type maximization of
Bernoulli entropy plus the limiting utility over out-link fractions in
[0,1]^C. Linear utilities admit a closed form; everything else goes through
the numerical maximizer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize
from scipy.special import expit

PI2_6 = math.pi * math.pi / 6.0


def bernoulli_entropy(p) -> float:
    """-p log p - (1-p) log(1-p), extended continuously to H(0) = H(1) = 0."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("entropy argument must lie in [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(p > 0, p * np.log(p), 0.0) - np.where(p < 1, (1 - p) * np.log1p(-p), 0.0)
    return float(h) if h.ndim == 0 else h


def _entropy_gradient(x: np.ndarray) -> np.ndarray:
    """H'(x) = log((1-x)/x); diverges at the cube boundary."""
    return np.log1p(-x) - np.log(x)


@dataclass
class LimitModel:
    """Limiting per-type utilities over out-link fractions.

    weights: limiting type fractions, strictly positive, sum to 1.
    utilities[r]: v_r(y) for y in [0,1]^C, with y already scaled by the type
    weights (y = w * x elementwise); v_r(0) is subtracted internally.
    gradients[r]: optional dv_r/dy oracle; finite differences otherwise.
    """

    weights: np.ndarray
    utilities: List[Callable[[np.ndarray], float]]
    gradients: Optional[List[Callable[[np.ndarray], np.ndarray]]] = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if np.any(self.weights <= 0):
            raise ValueError("type weights must be strictly positive")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("type weights must sum to 1")
        if len(self.utilities) != len(self.weights):
            raise ValueError("need one utility function per type")
        for r, v in enumerate(self.utilities):
            v0 = v(np.zeros(len(self.weights)))
            if not np.isfinite(v0):
                raise ValueError(f"v_{r}(0) = {v0} must be finite")

    @property
    def n_types(self) -> int:
        return len(self.weights)

    @classmethod
    def linear(cls, coeffs: np.ndarray, weights: Sequence[float]) -> "LimitModel":
        """v_r(y) = sum_s coeffs[r,s] * y_s."""
        coeffs = np.asarray(coeffs, dtype=float)
        utilities = [lambda y, a=coeffs[r]: float(a @ y) for r in range(coeffs.shape[0])]
        gradients = [lambda y, a=coeffs[r]: a.copy() for r in range(coeffs.shape[0])]
        return cls(np.asarray(weights, dtype=float), utilities, gradients)


@dataclass
class ZetaResult:
    """Value and per-type maximizers of the limiting partition density."""

    zeta: float
    maximizers: List[np.ndarray]
    gradient_norms: List[float]
    iterations: int
    converged: bool


def _objective_and_grad(lm: LimitModel, r: int, x: np.ndarray) -> Tuple[float, np.ndarray]:
    w = lm.weights
    y = w * x
    v = lm.utilities[r]
    val = float(np.sum(w * bernoulli_entropy(x))) + v(y) - v(np.zeros_like(y))
    if lm.gradients is not None:
        gv = np.asarray(lm.gradients[r](y), dtype=float)
    else:
        gv = np.empty_like(y)
        h = 1e-7
        for s in range(len(y)):
            e = np.zeros_like(y)
            e[s] = h
            gv[s] = (v(y + e) - v(y - e)) / (2 * h)
    grad = w * _entropy_gradient(np.clip(x, 1e-300, 1 - 1e-16)) + w * gv
    return val, grad


def _newton_polish(lm: LimitModel, r: int, x: np.ndarray, tol: float = 1e-11,
                   max_iter: int = 60) -> Tuple[np.ndarray, float]:
    """Newton iterations on the interior first-order conditions.

    The entropy Hessian is diagonal and dominant near the optimum, so a
    finite-difference Hessian of the utility part is enough for quadratic
    convergence.
    """
    c = lm.n_types
    for _ in range(max_iter):
        _, grad = _objective_and_grad(lm, r, x)
        if np.linalg.norm(grad) < tol:
            break
        hess = np.zeros((c, c))
        h = 1e-6
        for s in range(c):
            e = np.zeros(c)
            e[s] = h
            xp = np.clip(x + e, 1e-12, 1 - 1e-12)
            xm = np.clip(x - e, 1e-12, 1 - 1e-12)
            _, gp = _objective_and_grad(lm, r, xp)
            _, gm = _objective_and_grad(lm, r, xm)
            hess[:, s] = (gp - gm) / (xp[s] - xm[s])
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        x_new = np.clip(x - step, 1e-12, 1 - 1e-12)
        if not np.isfinite(x_new).all():
            break
        x = x_new
    _, grad = _objective_and_grad(lm, r, x)
    return x, float(np.linalg.norm(grad))


def _multistart_points(c: int) -> List[np.ndarray]:
    """Deterministic starts: the 0.25/0.75 corners plus the cube center."""
    pts = [np.full(c, 0.5)]
    for bits in range(1 << c):
        pts.append(np.array([0.75 if bits >> s & 1 else 0.25 for s in range(c)]))
    return pts


def zeta_isolated(lm: LimitModel) -> ZetaResult:
    """Maximize entropy plus limiting utility per type and weight the values.

    Projected quasi-Newton (L-BFGS-B on the closed cube) from deterministic
    multi-starts, then a Newton polish on the interior stationarity
    conditions. The entropy term has infinite slope at the boundary, so
    maximizers of bounded-slope utilities are interior; the result is a
    certified lower bound, and the global maximum whenever v_r is concave.
    """
    c = lm.n_types
    maximizers: List[np.ndarray] = []
    grad_norms: List[float] = []
    total = 0.0
    iterations = 0
    converged = True
    for r in range(c):
        best_val = -np.inf
        best_x = None
        for x0 in _multistart_points(c):
            res = optimize.minimize(
                lambda x: -_objective_and_grad(lm, r, np.clip(x, 1e-12, 1 - 1e-12))[0],
                x0,
                jac=lambda x: -_objective_and_grad(lm, r, np.clip(x, 1e-12, 1 - 1e-12))[1],
                method="L-BFGS-B",
                bounds=[(1e-12, 1 - 1e-12)] * c,
                options={"ftol": 1e-16, "gtol": 1e-12, "maxiter": 500},
            )
            iterations += int(res.nit)
            val = -float(res.fun)
            if val > best_val:
                best_val = val
                best_x = np.asarray(res.x)
        x_star, gnorm = _newton_polish(lm, r, best_x)
        val, _ = _objective_and_grad(lm, r, x_star)
        if val < best_val - 1e-12:
            x_star, val = best_x, best_val  # polish wandered; keep the L-BFGS-B point
            _, gnorm = _objective_and_grad(lm, r, x_star)
            gnorm = float(np.linalg.norm(gnorm))
        if gnorm > 1e-8:
            converged = False
        maximizers.append(x_star)
        grad_norms.append(gnorm)
        total += lm.weights[r] * val
    return ZetaResult(
        zeta=float(total),
        maximizers=maximizers,
        gradient_norms=grad_norms,
        iterations=iterations,
        converged=converged,
    )


def zeta_discrete_homophily(v0: float, gamma: float, dist: np.ndarray,
                            weights: Sequence[float]) -> float:
    """Closed form for linear typed utilities:
    sum_{r,s} w_r w_s log(1 + exp(v0 - gamma * dist[r,s]))."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    dist = np.asarray(dist, dtype=float)
    if np.any(dist < 0):
        raise ValueError("distances must be nonnegative")
    w = np.asarray(weights, dtype=float)
    terms = np.logaddexp(0.0, v0 - gamma * dist)
    return float(w @ terms @ w)


# ---------------------------------------------------------------------------
# Dilogarithm (nonpositive real arguments)
# ---------------------------------------------------------------------------

def _dilog_series(z: float) -> float:
    """Power series sum z^k / k^2; geometric convergence for |z| <= 2/3."""
    total = 0.0
    term = z
    k = 1
    while True:
        inc = term / (k * k)
        total += inc
        if abs(inc) < 1e-18 * max(1.0, abs(total)):
            return total
        k += 1
        term *= z
        if k > 400:
            return total


def dilog(z: float) -> float:
    """Dilogarithm for z <= 0: series, Landen, and inversion branches.

    Only nonpositive arguments arise here (values of the form -e^x), where
    the function is real-analytic. Positive arguments are rejected.
    """
    z = float(z)
    if z > 0.0:
        raise ValueError(f"dilog implemented for z <= 0 only, got {z}")
    if z == 0.0:
        return 0.0
    if z >= -0.5:
        return _dilog_series(z)
    if z >= -2.0:
        # Landen: Li2(z) = -Li2(z/(z-1)) - log^2(1-z)/2; mapped arg in (1/3, 2/3)
        u = z / (z - 1.0)
        return -_dilog_series(u) - 0.5 * math.log1p(-z) ** 2
    # inversion: Li2(z) = -Li2(1/z) - pi^2/6 - log^2(-z)/2; 1/z in (-0.5, 0)
    return -_dilog_series(1.0 / z) - PI2_6 - 0.5 * math.log(-z) ** 2


def dilog_quadrature(z: float, tol: float = 1e-12) -> float:
    """Independent evaluation from the defining integral -int_0^z log(1-t)/t dt."""
    if z > 0.0:
        raise ValueError("quadrature oracle defined for z <= 0")
    if z == 0.0:
        return 0.0

    def integrand(t):
        if t == 0.0:
            return 1.0
        return -math.log1p(-t) / t

    val, _ = integrate.quad(integrand, 0.0, z, epsabs=tol, epsrel=tol, limit=200)
    return val


# ---------------------------------------------------------------------------
# Continuous-type partition densities
# ---------------------------------------------------------------------------

def zeta_continuous(
    v0: float,
    gamma: float,
    density: Callable[[float], float],
    distance: Callable[[float, float], float],
    support: Tuple[float, float],
    tol: float = 1e-8,
) -> float:
    """Adaptive 2-D quadrature of rho(t) rho(t') log(1 + e^(v0 - gamma D(t,t'))).

    The density must integrate to 1 on the support and the distance must be
    bounded; the integrand is then smooth and bounded.
    """
    lo, hi = support

    def inner(tp: float, t: float) -> float:
        return (
            density(t)
            * density(tp)
            * float(np.logaddexp(0.0, v0 - gamma * distance(t, tp)))
        )

    val, err = integrate.dblquad(inner, lo, hi, lambda _: lo, lambda _: hi,
                                 epsabs=tol, epsrel=1e-10)
    if not np.isfinite(val) or err > 10 * max(tol, 1e-12):
        raise RuntimeError(f"2-D quadrature failed to converge (error {err:.2e})")
    return float(val)


def circle_distance(L: float) -> Callable[[float, float], float]:
    """Arc distance on a circle of circumference L."""

    def d(a: float, b: float) -> float:
        u = abs(a - b) % L
        return min(u, L - u)

    return d


def zeta_continuous_uniform_circle(v0: float, gamma: float, L: float) -> float:
    """Closed form for uniform types on a circle of circumference L.

    For gamma > 0 the value is (2/(L*gamma)) * [Li2(-e^(v0 - gamma L/2)) -
    Li2(-e^(v0))], which is the antiderivative of the defining integral and
    is positive; at gamma = 0 it continuously becomes log(1 + e^(v0)).
    """
    if L <= 0:
        raise ValueError("circumference must be positive")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if gamma == 0.0:
        return float(np.logaddexp(0.0, v0))
    a = dilog(-math.exp(v0 - gamma * L / 2.0))
    b = dilog(-math.exp(v0))
    return (2.0 / (L * gamma)) * (a - b)


# ---------------------------------------------------------------------------
# Link density and neighbor distance
# ---------------------------------------------------------------------------

def density_and_distance(
    zeta_fn: Callable[[float, float], float],
    v0: float,
    gamma: float,
    dzeta_dv0: Optional[Callable[[float, float], float]] = None,
    dzeta_dgamma: Optional[Callable[[float, float], float]] = None,
    step: float = 1e-5,
) -> Tuple[float, float]:
    """(link density, mean neighbor distance) from a partition density.

    Density is the v0-derivative; distance is minus the gamma-derivative
    divided by the density. Analytic partials are used when supplied;
    otherwise Richardson-refined central differences with the given step.
    """
    def central(f, x, h):
        # one Richardson step on the central difference kills the h^2 term
        d1 = (f(x + h) - f(x - h)) / (2 * h)
        d2 = (f(x + h / 2) - f(x - h / 2)) / h
        return (4.0 * d2 - d1) / 3.0

    if dzeta_dv0 is not None:
        mu = float(dzeta_dv0(v0, gamma))
    else:
        mu = central(lambda v: zeta_fn(v, gamma), v0, step)
    if mu < 1e-12:
        raise ValueError(f"link density {mu:.3e} is vanishing; distance undefined")
    if dzeta_dgamma is not None:
        dg = float(dzeta_dgamma(v0, gamma))
    elif gamma >= step:
        dg = central(lambda g: zeta_fn(v0, g), gamma, step)
    else:
        dg = (zeta_fn(v0, gamma + step) - zeta_fn(v0, gamma)) / step  # one-sided at 0
    eta = -dg / mu
    return float(mu), float(eta)


def homophily_mu_eta_discrete(v0: float, gamma: float, dist: np.ndarray,
                              weights: Sequence[float]) -> Tuple[float, float]:
    """Analytic functionals of the discrete-type closed form.

    mu = sum w_r w_s sigma(v0 - gamma D_rs); eta is the sigma-weighted mean
    distance. At gamma = 0 this collapses to sigma(v0) and the plain mean.
    """
    dist = np.asarray(dist, dtype=float)
    w = np.asarray(weights, dtype=float)
    s = expit(v0 - gamma * dist)
    mu = float(w @ s @ w)
    if mu < 1e-12:
        raise ValueError("link density is vanishing; distance undefined")
    eta = float(w @ (dist * s) @ w) / mu
    return mu, eta


def homophily_mu_eta_circle(v0: float, gamma: float, L: float) -> Tuple[float, float]:
    """Analytic functionals of the uniform-circle closed form.

    mu integrates the logistic over arc lengths; eta is the logistic-weighted
    mean arc distance, L/4 at gamma = 0.
    """
    if gamma == 0.0:
        return float(expit(v0)), L / 4.0
    # mu = (2/L) int_0^{L/2} sigma(v0 - gamma u) du, in closed form
    top = float(np.logaddexp(0.0, v0))
    bot = float(np.logaddexp(0.0, v0 - gamma * L / 2.0))
    mu = (2.0 / (L * gamma)) * (top - bot)
    if mu < 1e-12:
        raise ValueError("link density is vanishing; distance undefined")
    # int_0^{L/2} u sigma(v0 - gamma u) du by parts -> log and dilog terms
    i0 = (1.0 / gamma) * (dilog(-math.exp(v0 - gamma * L / 2.0)) - dilog(-math.exp(v0)))
    int_u_sigma = (-(L / (2.0 * gamma)) * bot + i0 / gamma)
    eta = (2.0 / L) * int_u_sigma / mu
    return float(mu), float(eta)


# ---------------------------------------------------------------------------
# Finite-N oracles for the linear typed model
# ---------------------------------------------------------------------------

def finite_linear_log_partition(v0: float, gamma: float, dist: np.ndarray,
                                counts: Sequence[int]) -> float:
    """Exact log Z for the per-dyad linear model at finite N.

    Every dyad is independent: log Z = sum_{r,s} N_r (N_s - [r==s])
    log(1 + e^(v0 - gamma D_rs)).
    """
    dist = np.asarray(dist, dtype=float)
    counts = np.asarray(counts, dtype=int)
    total = 0.0
    for r in range(len(counts)):
        for s in range(len(counts)):
            pairs = counts[r] * (counts[s] - (1 if r == s else 0))
            total += pairs * float(np.logaddexp(0.0, v0 - gamma * dist[r, s]))
    return total


def finite_linear_link_fraction(v0: float, gamma: float, dist: np.ndarray,
                                counts: Sequence[int]) -> float:
    """Exact expected link fraction <|g|> / (N(N-1)) for the linear model."""
    dist = np.asarray(dist, dtype=float)
    counts = np.asarray(counts, dtype=int)
    n = int(counts.sum())
    mean_links = 0.0
    for r in range(len(counts)):
        for s in range(len(counts)):
            pairs = counts[r] * (counts[s] - (1 if r == s else 0))
            mean_links += pairs * float(expit(v0 - gamma * dist[r, s]))
    return mean_links / (n * (n - 1))
