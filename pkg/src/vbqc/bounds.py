"""Closed-form tail bounds, the verifiability bound and its minimisation.

Every bound is available as a plain float and in log space; the log form is
what the optimiser and planner work with, because the bound underflows
doubles long before ``n`` gets interesting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

# --- tail bounds --------------------------------------------------------------


def hypergeom_lower_tail_bound(N: int, K: int, n: int, lam: float) -> float:
    """Bound on ``Pr[X <= lam]`` for ``X`` ~ Hypergeometric(N, K, n): ``exp(-2n(K/N - lam/n)^2)``."""
    mean = n * K / N
    if not 0 < lam < mean:
        raise ValueError(f"lower tail needs 0 < lambda < nK/N = {mean}")
    return math.exp(-2 * n * (K / N - lam / n) ** 2)


def hypergeom_upper_tail_bound(N: int, K: int, n: int, lam: float) -> float:
    """Bound on ``Pr[X >= lam]``: ``exp(-2n(lam/n - K/N)^2)``."""
    mean = n * K / N
    if not mean < lam <= n:
        raise ValueError(f"upper tail needs nK/N = {mean} < lambda <= n")
    return math.exp(-2 * n * (lam / n - K / N) ** 2)


def binomial_tail_bound(n: int, p: float, cutoff: float, side: str) -> float:
    """Hoeffding bound ``exp(-2(np - cutoff)^2 / n)`` on the lower or upper tail."""
    if side == "lower":
        if cutoff > n * p:
            raise ValueError("lower tail needs cutoff <= np")
    elif side == "upper":
        if cutoff < n * p:
            raise ValueError("upper tail needs cutoff >= np")
    else:
        raise ValueError("side must be 'lower' or 'upper'")
    return math.exp(-2 * (n * p - cutoff) ** 2 / n)


# --- exact oracles ----------------------------------------------------------------

ORACLE_LIMIT = 10_000


def hypergeom_pmf_exact(N: int, K: int, n: int) -> list[Fraction]:
    """Exact probabilities ``Pr[X = i]`` for ``i = 0..n`` as fractions."""
    if N > ORACLE_LIMIT:
        raise ValueError(f"N = {N} exceeds the exact-oracle limit {ORACLE_LIMIT}")
    if not (0 <= K <= N and 0 <= n <= N):
        raise ValueError("need 0 <= K, n <= N")
    total = math.comb(N, n)
    return [Fraction(math.comb(K, i) * math.comb(N - K, n - i), total) for i in range(n + 1)]


def hypergeom_cdf_exact(N: int, K: int, n: int, lam: float) -> float:
    """``Pr[X <= lam]`` by exact rational summation."""
    pmf = hypergeom_pmf_exact(N, K, n)
    top = math.floor(lam)
    return float(sum(pmf[: max(top + 1, 0)], Fraction(0)))


def hypergeom_sf_exact(N: int, K: int, n: int, lam: float) -> float:
    """``Pr[X >= lam]`` by exact rational summation."""
    pmf = hypergeom_pmf_exact(N, K, n)
    lo = max(math.ceil(lam), 0)
    return float(sum(pmf[lo:], Fraction(0)))


def _binom_log_pmf(n: int, p: float, i: int) -> float:
    if p == 0.0:
        return 0.0 if i == 0 else -math.inf
    if p == 1.0:
        return 0.0 if i == n else -math.inf
    return (
        math.lgamma(n + 1)
        - math.lgamma(i + 1)
        - math.lgamma(n - i + 1)
        + i * math.log(p)
        + (n - i) * math.log1p(-p)
    )


def binomial_cdf_exact(n: int, p: float, cutoff: float) -> float:
    """``Pr[X <= cutoff]`` by compensated summation of the pmf."""
    if n > ORACLE_LIMIT:
        raise ValueError(f"n = {n} exceeds the exact-oracle limit {ORACLE_LIMIT}")
    top = min(math.floor(cutoff), n)
    return min(1.0, math.fsum(math.exp(_binom_log_pmf(n, p, i)) for i in range(top + 1)))


def binomial_sf_exact(n: int, p: float, cutoff: float) -> float:
    """``Pr[X >= cutoff]``."""
    if n > ORACLE_LIMIT:
        raise ValueError(f"n = {n} exceeds the exact-oracle limit {ORACLE_LIMIT}")
    lo = max(math.ceil(cutoff), 0)
    return min(1.0, math.fsum(math.exp(_binom_log_pmf(n, p, i)) for i in range(lo, n + 1)))


# --- verifiability ------------------------------------------------------------------


@dataclass(frozen=True)
class BoundParams:
    """Run counts plus the free triple ``(eps1, eps2, phi)``."""

    n: int
    d: int
    t: int
    k: int
    eps1: float
    eps2: float
    phi: float

    def __post_init__(self) -> None:
        if self.n != self.d + self.t or self.d <= 0 or self.t <= 0:
            raise ValueError("need n = d + t with d, t > 0")
        if not 0 < self.eps1 < 0.5:
            raise ValueError("need 0 < eps1 < 1/2")
        if not 0 < self.eps2 < 1 / self.k:
            raise ValueError("need 0 < eps2 < 1/k")
        if not 0 < self.phi < 0.5 - self.eps1:
            raise ValueError("need 0 < phi < 1/2 - eps1")

    @property
    def omega(self) -> float:
        """The threshold ratio ``w/t`` this triple certifies."""
        return (1 / self.k - self.eps2) * (0.5 - self.phi - self.eps1)

    @property
    def delta_ratio(self) -> float:
        return self.d / self.n

    @property
    def tau(self) -> float:
        return self.t / self.n


def _log_terms(n, d, t, eps1, eps2, phi):
    """Exponents of the three exponentials; broadcasts over numpy arrays."""
    half = 0.5 - phi
    a = -2.0 * (phi**2 / half) * (d**2 / n)
    b = -2.0 * (t**2 / (half * n)) * eps1**2
    c = -2.0 * t * (half - eps1) * eps2**2
    return a, b, c


def log_verifiability_bound(bp: BoundParams) -> float:
    a, b, c = _log_terms(bp.n, bp.d, bp.t, bp.eps1, bp.eps2, bp.phi)
    return max(a, float(np.logaddexp(b, c)))


def verifiability_bound(bp: BoundParams) -> float:
    """``max{e^a, e^b + e^c}`` exactly as printed; may exceed 1 at small ``n``."""
    a, b, c = _log_terms(bp.n, bp.d, bp.t, bp.eps1, bp.eps2, bp.phi)
    return max(math.exp(a), math.exp(b) + math.exp(c))


def eps2_for_omega(k: int, omega: float, eps1: float, phi: float) -> float:
    """Solve the threshold tie ``omega = (1/k - eps2)(1/2 - phi - eps1)`` for ``eps2``."""
    return 1 / k - omega / (0.5 - phi - eps1)


def feasible_omega_sup(k: int) -> float:
    """Supremum of thresholds ``w/t`` that admit a valid triple: ``1/(2k)``."""
    return 1 / (2 * k)


class InfeasibleError(ValueError):
    pass


def check_feasible(k: int, omega: float) -> None:
    if k < 1:
        raise InfeasibleError("infeasible: k must be positive")
    if not omega > 0:
        raise InfeasibleError("infeasible: omega must be positive")
    if omega >= feasible_omega_sup(k):
        raise InfeasibleError("infeasible: omega >= 1/(2k)")


@dataclass(frozen=True)
class OptimizedBound:
    value: float
    log_value: float
    eps1: float
    eps2: float
    phi: float

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "log_value": self.log_value,
            "argmin": {"eps1": self.eps1, "eps2": self.eps2, "phi": self.phi},
        }


def _objective(n, d, t, k, omega, u, v):
    """Log bound on the unit square: ``phi = S u``, ``eps1 = S (1 - u) v``.

    ``S = 1/2 - k omega`` is the room left for ``phi + eps1``; any interior
    point of the square maps to a feasible triple.
    """
    s = 0.5 - k * omega
    phi = s * u
    eps1 = s * (1 - u) * v
    eps2 = 1 / k - omega / (0.5 - phi - eps1)
    a, b, c = _log_terms(n, d, t, eps1, eps2, phi)
    return np.maximum(a, np.logaddexp(b, c)), phi, eps1, eps2


def optimize_verifiability_bound(
    n: int, d: int, t: int, k: int, omega: float, grid: int = 200, sweeps: int = 60
) -> OptimizedBound:
    """Minimise the verifiability bound over the feasible triples.

    A ``grid x grid`` scan of the unit square is followed by a compass
    search that halves its step whenever no neighbour improves. Both stages
    are deterministic and only ever accept feasible points, so the result
    is a valid bound however well the search does.
    """
    check_feasible(k, omega)
    if n != d + t or d <= 0 or t <= 0:
        raise ValueError("need n = d + t with d, t > 0")
    axis = (np.arange(grid) + 0.5) / grid
    uu, vv = np.meshgrid(axis, axis, indexing="ij")
    vals = _objective(n, d, t, k, omega, uu, vv)[0]
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    u, v = float(uu[i, j]), float(vv[i, j])
    best = float(vals[i, j])
    step = 1.0 / grid
    tiny = 1e-12
    for _ in range(sweeps):
        improved = False
        for du, dv in ((step, 0), (-step, 0), (0, step), (0, -step)):
            cu, cv = u + du, v + dv
            if not (tiny < cu < 1 - tiny and tiny < cv < 1 - tiny):
                cu = min(max(cu, tiny), 1 - tiny)
                cv = min(max(cv, tiny), 1 - tiny)
            val = float(_objective(n, d, t, k, omega, cu, cv)[0])
            if val < best:
                best, u, v, improved = val, cu, cv, True
        if not improved:
            step /= 2
            if step < 1e-15:
                break
    _, phi, eps1, eps2 = _objective(n, d, t, k, omega, u, v)
    return OptimizedBound(
        value=math.exp(best),
        log_value=best,
        eps1=float(eps1),
        eps2=float(eps2),
        phi=float(phi),
    )


def split_runs(n: int, delta_ratio: float) -> tuple[int, int]:
    d = int(round(delta_ratio * n))
    return d, n - d


def asymptotic_rate(k: int, omega: float, delta_ratio: float, grid: int = 400) -> tuple[float, dict]:
    """Largest decay rate ``r`` with bound ``~ exp(-r n)`` over feasible triples.

    For fixed ratios each exponent is linear in ``n``; the bound decays at
    the slowest of the three rates, and the best triple maximises that.
    """
    check_feasible(k, omega)
    tau = 1 - delta_ratio
    axis = (np.arange(grid) + 0.5) / grid
    uu, vv = np.meshgrid(axis, axis, indexing="ij")
    # per-unit-n exponents: n = 1, d = delta, t = tau
    _, phi, eps1, eps2 = _objective(1.0, delta_ratio, tau, k, omega, uu, vv)
    a, b, c = _log_terms(1.0, delta_ratio, tau, eps1, eps2, phi)
    rate = np.minimum(-a, np.minimum(-b, -c))
    i, j = np.unravel_index(np.argmax(rate), rate.shape)
    return float(rate[i, j]), {"phi": float(phi[i, j]), "eps1": float(eps1[i, j]), "eps2": float(eps2[i, j])}


@dataclass(frozen=True)
class Plan:
    n: int
    d: int
    t: int
    w: int
    bound: OptimizedBound

    def to_dict(self) -> dict:
        return {"n": self.n, "d": self.d, "t": self.t, "w": self.w, **self.bound.to_dict()}


def _planned_log_bound(n: int, delta_ratio: float, k: int, omega: float) -> tuple[float, OptimizedBound | None]:
    d, t = split_runs(n, delta_ratio)
    if d <= 0 or t <= 0:
        return 0.0, None
    ob = optimize_verifiability_bound(n, d, t, k, omega)
    # a probability never exceeds 1, so min(1, bound) is equally valid
    return min(0.0, ob.log_value), ob


def min_n_for_target(eps_target: float, delta_ratio: float, omega: float, k: int, n_max: int = 1 << 24) -> Plan:
    """Smallest ``n`` whose optimised bound (capped at 1) is at most ``eps_target``.

    Doubling finds a feasible ``n``; bisection then assumes the bound is
    monotone in ``n`` at fixed ratios.
    """
    check_feasible(k, omega)
    if not 0 < eps_target <= 1:
        raise ValueError("eps_target must lie in (0, 1]")
    if not 0 < delta_ratio < 1:
        raise ValueError("delta_ratio must lie in (0, 1)")
    target = math.log(eps_target)
    lo = 2
    while True:
        d, t = split_runs(lo, delta_ratio)
        if d > 0 and t > 0:
            break
        lo += 1
    if _planned_log_bound(lo, delta_ratio, k, omega)[0] <= target:
        hi = lo
    else:
        hi = lo
        while _planned_log_bound(hi, delta_ratio, k, omega)[0] > target:
            lo = hi
            hi *= 2
            if hi > n_max:
                raise ValueError(f"no n <= {n_max} reaches the target")
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if _planned_log_bound(mid, delta_ratio, k, omega)[0] <= target:
                hi = mid
            else:
                lo = mid
    d, t = split_runs(hi, delta_ratio)
    ob = _planned_log_bound(hi, delta_ratio, k, omega)[1]
    return Plan(n=hi, d=d, t=t, w=int(math.ceil(omega * t - 1e-12)), bound=ob)


# --- composition and robustness ---------------------------------------------------


def composable_epsilon(eps_ver: float) -> float:
    """``4 sqrt(2 eps_ver)``."""
    if eps_ver < 0:
        raise ValueError("eps_ver must be non-negative")
    return 4 * math.sqrt(2 * eps_ver)


@dataclass(frozen=True)
class RobustnessParams:
    p_min: float
    p_max: float
    omega: float
    tau: float
    delta_ratio: float
    n: int

    def __post_init__(self) -> None:
        if not 0 <= self.p_min <= self.p_max < 0.5:
            raise ValueError("need 0 <= p_min <= p_max < 1/2")


def correctness_epsilon(rp: RobustnessParams) -> float:
    """``exp(-2(omega - p_max)^2 tau n) + exp(-2(1/2 - p_max)^2 delta n)``."""
    if rp.omega <= rp.p_max:
        raise ValueError("correctness bound needs omega > p_max")
    return math.exp(-2 * (rp.omega - rp.p_max) ** 2 * rp.tau * rp.n) + math.exp(
        -2 * (0.5 - rp.p_max) ** 2 * rp.delta_ratio * rp.n
    )


def abort_probability_bound(p_min: float, omega: float, tau: float, n: int) -> float:
    """Upper bound ``exp(-2(p_min - omega)^2 tau n)`` on the accept probability."""
    if omega >= p_min:
        raise ValueError("abort bound needs omega < p_min")
    return math.exp(-2 * (p_min - omega) ** 2 * tau * n)
