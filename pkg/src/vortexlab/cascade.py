"""Multi-scale height cascade: dx_k/dt = x_k * sum_{j<k} a_{k,j}(t) x_j.

Closed-form solution for unit coefficients, adaptive log-space integration
for general coefficient bands, and the verdicts for the integral upper
bound, the recursive lower envelope, the monotone-ratio property and the
Holder-exponent prediction.

Sign conventions: backward times are negative reals (t <= 0, heights are
pinned at t = 0 to x_k(0) = A**k); integrals written over [-a, 0] are
computed left-to-right with positive measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .quadrature import simpson_certified

_EXP_LIMIT = 700.0  # float64 exponent range in nats


class SizingError(ValueError):
    """Requested cascade would overflow double precision."""


class FixedPointError(ValueError):
    """No sign change found when bracketing a fixed-point equation."""


# ---------------------------------------------------------------------------
# coefficient families
# ---------------------------------------------------------------------------


class CoefficientFamily:
    """Piecewise-constant coefficients a_{k,j}(t) on a dyadic partition.

    `shared=True` makes the family level-independent (a_j(t) only), the
    setting required by the monotone-ratio lemma.  Values are drawn once,
    seeded, uniformly in [lo, hi]; `lo == hi` degenerates to a constant.
    """

    def __init__(self, n_levels, t_min, lo=1.0, hi=1.0, *, shared=False,
                 seed=0, depth=4):
        if lo > hi:
            raise ValueError("coeff_lo must be <= coeff_hi")
        if t_min >= 0:
            raise ValueError("t_min must be negative")
        self.n_levels = int(n_levels)
        self.t_min = float(t_min)
        self.lo, self.hi = float(lo), float(hi)
        self.shared = bool(shared)
        self.seed = int(seed)
        self.depth = int(depth)
        self.n_cells = 1 << depth
        self.breaks = np.linspace(t_min, 0.0, self.n_cells + 1)
        if lo == hi:
            shape = (1, 1)
            self.values = np.full(shape, lo)
        else:
            rng = np.random.default_rng([seed, n_levels, depth])
            rows = n_levels if shared else n_levels * n_levels
            self.values = rng.uniform(lo, hi, size=(rows, self.n_cells))

    def is_constant(self):
        return self.lo == self.hi

    def cell_of(self, t):
        i = int(np.floor((t - self.t_min) / (0.0 - self.t_min) * self.n_cells))
        return min(max(i, 0), self.n_cells - 1)

    def coeff_matrix(self, cell):
        """Lower-triangular matrix a[k, j] (j < k) on the given cell."""
        n = self.n_levels
        out = np.zeros((n, n))
        if self.is_constant():
            vals = np.full((n, n), self.lo)
        elif self.shared:
            vals = np.tile(self.values[:, cell], (n, 1))
        else:
            vals = self.values[:, cell].reshape(n, n)
        idx = np.tril_indices(n, k=-1)
        out[idx] = vals[idx]
        return out

    def __call__(self, k, j, t):
        cell = self.cell_of(t)
        if self.is_constant():
            return self.lo
        if self.shared:
            return self.values[j, cell]
        return self.values[k * self.n_levels + j, cell]

    def describe(self):
        return {
            "kind": "constant" if self.is_constant() else "piecewise-random",
            "lo": self.lo, "hi": self.hi, "shared": self.shared,
            "seed": self.seed, "depth": self.depth,
        }


@dataclass(frozen=True)
class CascadeParams:
    """Inputs of one cascade run (heights pinned to A**k at t = 0)."""

    growth_ratio: float            # A > 1
    n_levels: int
    t_min: float                   # left end of the (negative) time span
    coeff_lo: float = 1.0
    coeff_hi: float = 1.0
    coeff_spec: str = "one"        # "one" | "constant" | "random"
    coeff_value: float = 1.0       # used by "constant"
    shared_coeffs: bool = False
    seed: int = 0
    depth: int = 4
    tol: float = 1e-10             # local error tolerance of the integrator

    def __post_init__(self):
        if not self.growth_ratio > 1.0:
            raise ValueError("growth ratio A must exceed 1")
        if self.n_levels <= 0:
            raise ValueError("need at least one level")
        if not self.t_min < 0.0:
            raise ValueError("t_min must be negative")
        if self.coeff_lo > self.coeff_hi:
            raise ValueError("coeff_lo must be <= coeff_hi")
        if self.coeff_spec not in ("one", "constant", "random"):
            raise ValueError(f"unknown coeff_spec {self.coeff_spec!r}")
        _check_sizing(self.growth_ratio, self.n_levels)

    def family(self):
        if self.coeff_spec == "one":
            lo = hi = 1.0
        elif self.coeff_spec == "constant":
            lo = hi = self.coeff_value
        else:
            lo, hi = self.coeff_lo, self.coeff_hi
        return CoefficientFamily(self.n_levels, self.t_min, lo, hi,
                                 shared=self.shared_coeffs, seed=self.seed,
                                 depth=self.depth)


def _check_sizing(A, n_levels):
    if n_levels * math.log(A) > _EXP_LIMIT:
        raise SizingError(
            f"n_levels*ln(A) = {n_levels * math.log(A):.1f} exceeds the "
            f"float64 exponent range ({_EXP_LIMIT:.0f})")


@dataclass
class CascadeTrajectory:
    """Sampled cascade with log heights and running time integrals.

    levels[k, i] = x_k(times[i]) > 0, log_levels = ln x, z[k, i] is the
    signed integral of x_k from 0 to times[i] (negative for t < 0).
    """

    times: np.ndarray
    levels: np.ndarray
    log_levels: np.ndarray
    z: np.ndarray
    growth_ratio: float
    coeffs_used: dict = field(default_factory=dict)
    _dense: object = None          # callable t -> (y, z) arrays, optional

    @property
    def n_levels(self):
        return self.levels.shape[0]

    def dense_x(self, k):
        """Vectorized t -> x_k(t); requires dense output."""
        if self._dense is None:
            raise ValueError("trajectory carries no dense output")
        return lambda t: np.exp(self._dense(np.asarray(t, dtype=float))[0][k])

    def integral_to_zero(self, k, t_from, tol=1e-9):
        """Certified integral of x_k over [t_from, 0] (positive measure)."""
        return simpson_certified(self.dense_x(k), t_from, 0.0, tol=tol)

    def to_csv_rows(self):
        rows = []
        for i, t in enumerate(self.times):
            for k in range(self.n_levels):
                rows.append((t, k, self.levels[k, i], self.log_levels[k, i],
                             self.z[k, i]))
        return rows


# ---------------------------------------------------------------------------
# closed form (unit coefficients)
# ---------------------------------------------------------------------------


def closed_form_cascade(A, n_levels, times):
    """Exact solution for a = 1: z_{k+1} = A(e^{z_k} - 1), x_k = A^k e^{sum z_j}."""
    if not A > 1.0:
        raise ValueError("growth ratio A must exceed 1")
    _check_sizing(A, n_levels)
    times = np.asarray(times, dtype=float)
    if np.any(times > 0.0):
        raise ValueError("closed form is for backward times t <= 0")
    order = np.argsort(times)
    t = times[order]

    z = np.empty((n_levels, t.size))
    z[0] = t
    for k in range(1, n_levels):
        z[k] = A * np.expm1(z[k - 1])
    y = np.empty_like(z)
    lnA = math.log(A)
    acc = np.zeros(t.size)
    for k in range(n_levels):
        y[k] = k * lnA + acc
        acc += z[k]
    x = np.exp(y)

    inv = np.argsort(order)
    traj = CascadeTrajectory(times=t[inv], levels=x[:, inv],
                             log_levels=y[:, inv], z=z[:, inv],
                             growth_ratio=A,
                             coeffs_used={"kind": "closed-form", "value": 1.0})
    traj._dense = _ClosedFormDense(A, n_levels)
    return traj


class _ClosedFormDense:
    def __init__(self, A, n_levels):
        self.A, self.n = A, n_levels

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        z = np.empty((self.n, t.size))
        z[0] = t
        for k in range(1, self.n):
            z[k] = self.A * np.expm1(z[k - 1])
        y = np.cumsum(np.vstack([np.zeros(t.size), z[:-1]]), axis=0)
        y += np.arange(self.n)[:, None] * math.log(self.A)
        return y, z


# ---------------------------------------------------------------------------
# adaptive integration (general coefficients)
# ---------------------------------------------------------------------------


class _SegmentedDense:
    """Chained solve_ivp dense outputs over the coefficient cells."""

    def __init__(self, segments, n_levels):
        # segments: list of (t_lo, t_hi, OdeSolution), t_lo < t_hi <= 0
        self.segments = segments
        self.n = n_levels

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((2 * self.n, t.size))
        lo = self.segments[0][0]
        for i, ti in enumerate(t):
            tq = min(max(ti, lo), 0.0)
            for t0, t1, sol in self.segments:
                if t0 - 1e-15 <= tq <= t1 + 1e-15:
                    out[:, i] = sol(tq)
                    break
            else:  # pragma: no cover - spans are contiguous
                raise ValueError(f"time {ti} outside integrated span")
        return out[: self.n], out[self.n :]


class StepUnderflowError(RuntimeError):
    def __init__(self, last_time):
        super().__init__(f"step size underflow at t = {last_time}")
        self.last_time = last_time


def integrate_cascade(params: CascadeParams, times=None):
    """Integrate the cascade backward from x_k(0) = A^k in log variables.

    Embedded Runge-Kutta pair (RK45) per coefficient cell so the adaptive
    controller never straddles a coefficient jump; dense output is stitched
    across cells.  Positivity is automatic because the state is ln x_k;
    the running integrals z_k ride along as extra state.
    """
    A, n = params.growth_ratio, params.n_levels
    fam = params.family()
    lnA = math.log(A)
    y0 = np.concatenate([lnA * np.arange(n), np.zeros(n)])

    if fam.is_constant():
        cells = [(params.t_min, 0.0, fam.coeff_matrix(0))]
    else:
        cells = [(fam.breaks[i], fam.breaks[i + 1], fam.coeff_matrix(i))
                 for i in range(fam.n_cells)]

    segments = []
    state = y0
    for t_lo, t_hi, amat in reversed(cells):
        def rhs(t, s, amat=amat):
            x = np.exp(s[:n])
            dy = amat @ x
            return np.concatenate([dy, x])

        sol = solve_ivp(rhs, (t_hi, t_lo), state, method="RK45",
                        rtol=params.tol, atol=params.tol, dense_output=True)
        if not sol.success:
            raise StepUnderflowError(sol.t[-1])
        segments.append((t_lo, t_hi, sol.sol))
        state = sol.y[:, -1]
    segments.reverse()

    dense = _SegmentedDense(segments, n)
    if times is None:
        times = np.linspace(params.t_min, 0.0, 257)
    times = np.sort(np.asarray(times, dtype=float))
    y, z = dense(times)
    traj = CascadeTrajectory(times=times, levels=np.exp(y), log_levels=y, z=z,
                             growth_ratio=A, coeffs_used=fam.describe())
    traj._dense = dense
    traj._family = fam
    return traj


# ---------------------------------------------------------------------------
# fixed points and lemma verdicts
# ---------------------------------------------------------------------------


def _bisect(g, lo, hi, residual_tol=1e-12, max_iter=200):
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if glo * ghi > 0.0:
        raise FixedPointError("no sign change in bracket: no fixed point found")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if abs(gm) <= residual_tol and hi - lo <= 1e-14 * max(1.0, mid):
            return mid
        if glo * gm <= 0.0:
            hi = mid
        else:
            lo, glo = mid, gm
    return 0.5 * (lo + hi)


def fixed_point_a(A, b=1.0, residual_tol=1e-12):
    """Smallest positive root of a = A e^{(b-1)a} (1 - e^{-a}).

    Guaranteed to exist for b <= 3/2 with (3/2-b)^2 >= 2(b-1)(A-1);
    outside that regime the bracket scan may legitimately fail.
    """
    if not A > 1.0:
        raise ValueError("growth ratio A must exceed 1")

    def g(a):
        return A * math.exp((b - 1.0) * a) * (-math.expm1(-a)) - a

    if b < 1.5:
        hi = 10.0 * max(1.0, 2.0 * (A - 1.0) / (1.5 - b))
    else:
        hi = 50.0
    # g > 0 near 0+ (slope A-1 > 0); walk a grid to find the first sign change
    grid = np.linspace(1e-15, hi, 4097)
    vals = np.array([g(a) for a in grid])
    neg = np.nonzero(vals <= 0.0)[0]
    if neg.size == 0:
        raise FixedPointError(
            f"no fixed point found for A={A}, b={b} in (0, {hi:.3g}]")
    i = neg[0]
    return _bisect(g, grid[max(i - 1, 0)], grid[i], residual_tol)


def remark_bound(A, b):
    """Explicit bound a <= 2(A-1)/(3/2-b); None when its hypotheses fail."""
    if b > 1.5 or (1.5 - b) ** 2 < 2.0 * (b - 1.0) * (A - 1.0):
        return None
    return 2.0 * (A - 1.0) / (1.5 - b)


@dataclass
class LemmaVerdict:
    lemma: str
    params: dict
    seed: int | None
    margin: float          # >= 0 means the inequality held with this slack
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_json_dict(self):
        d = {"lemma": self.lemma, "params": self.params, "seed": self.seed,
             "margin": self.margin, "pass": self.passed}
        if self.detail:
            d["detail"] = self.detail
        return d


def verify_int_le(traj: CascadeTrajectory, A, b, quad_tol=1e-9):
    """Check the uniform bound: integral of x_n over [-a, 0] <= a, all n.

    a is the fixed point for (A, b); the trajectory must have been produced
    with coefficients inside [1, b] and must span [-a, 0].
    """
    fam = getattr(traj, "_family", None)
    if fam is not None and (fam.lo < 1.0 - 1e-12 or fam.hi > b + 1e-12):
        raise ValueError("trajectory coefficients outside [1, b]")
    a = fixed_point_a(A, b)
    if traj.times[0] > -a:
        raise ValueError(f"trajectory span does not reach t = {-a}")
    verdicts = []
    for k in range(traj.n_levels):
        integral, quad_err = traj.integral_to_zero(k, -a, tol=quad_tol)
        margin = a + quad_tol - integral
        verdicts.append(LemmaVerdict(
            lemma="integral-upper-bound", seed=fam.seed if fam else None,
            params={"A": A, "b": b, "a": a, "level": k},
            margin=margin, passed=margin >= 0.0,
            detail={"integral": integral, "quad_err": quad_err}))
    return verdicts


def chained_upper_recursion(A, b, a, n_terms):
    """Z_0 = a, Z_{k+1} = A e^{(b-1)a} (1 - e^{-Z_k}); constant at the fixed point."""
    out = [a]
    for _ in range(n_terms - 1):
        out.append(A * math.exp((b - 1.0) * a) * (-math.expm1(-out[-1])))
    return np.array(out)


def lower_envelope(traj: CascadeTrajectory, A, b, t, quad_tol=1e-9):
    """Recursive lower bound I_n(t) for the integral of x_n over [t, 0].

    Uses I_0 = |t| (the signed-t convention is reported alongside, not
    asserted: with t <= 0 the literal recursion turns negative and the
    bound is vacuous).  Coefficients must lie in [b, 1], b <= 1.
    """
    fam = getattr(traj, "_family", None)
    if fam is not None and (fam.lo < b - 1e-12 or fam.hi > 1.0 + 1e-12):
        raise ValueError("trajectory coefficients outside [b, 1]")
    if t < traj.times[0] or t > 0.0:
        raise ValueError("t outside trajectory span")
    n = traj.n_levels
    pref = A * math.exp((1.0 - b) * t)
    I_abs = np.empty(n)
    I_signed = np.empty(n)
    I_abs[0], I_signed[0] = abs(t), t
    for k in range(1, n):
        I_abs[k] = pref * (-math.expm1(-I_abs[k - 1]))
        # literal signed convention diverges to -inf; report it, capped
        prev = I_signed[k - 1]
        I_signed[k] = pref * (-math.expm1(-prev)) if prev > -500.0 else -math.inf

    verdicts = []
    for k in range(n):
        integral, quad_err = traj.integral_to_zero(k, t, tol=quad_tol)
        margin = integral - (I_abs[k] - quad_tol)
        verdicts.append(LemmaVerdict(
            lemma="integral-lower-bound", seed=fam.seed if fam else None,
            params={"A": A, "b": b, "t": t, "level": k},
            margin=margin, passed=margin >= 0.0,
            detail={"integral": integral, "I_n": I_abs[k],
                    "I_n_signed_convention": I_signed[k],
                    "quad_err": quad_err}))
    return I_abs, verdicts


def lower_envelope_limit(A, b, t, tol=1e-12, max_iter=100000):
    """Limit of the I_n recursion: the root a' of a' = A e^{(1-b)t}(1-e^{-a'})
    when that prefactor exceeds 1, else 0."""
    pref = A * math.exp((1.0 - b) * t)
    if pref <= 1.0:
        return 0.0
    g = lambda s: pref * (-math.expm1(-s)) - s
    hi = 10.0 * max(1.0, 2.0 * (pref - 1.0) * 2.0)
    grid = np.linspace(1e-15, hi, 4097)
    vals = np.array([g(s) for s in grid])
    neg = np.nonzero(vals <= 0.0)[0]
    if neg.size == 0:
        raise FixedPointError("no envelope limit found")
    i = neg[0]
    return _bisect(g, grid[max(i - 1, 0)], grid[i], tol)


def verify_monotone_ratio(traj: CascadeTrajectory, rtol=1e-10):
    """x_n/x_k must be non-decreasing in t when coefficients are shared."""
    fam = getattr(traj, "_family", None)
    if fam is not None and not (fam.shared or fam.is_constant()):
        raise ValueError("monotone-ratio lemma needs level-independent coefficients")
    y = traj.log_levels
    worst = np.inf
    for k in range(traj.n_levels):
        for m in range(k + 1, traj.n_levels):
            d = np.diff(y[m] - y[k])   # log-ratio increments, should be >= 0
            worst = min(worst, d.min() if d.size else np.inf)
    margin = worst + rtol
    return LemmaVerdict(
        lemma="monotone-ratio", seed=fam.seed if fam else None,
        params={"A": traj.growth_ratio, "n_levels": traj.n_levels},
        margin=float(margin), passed=bool(margin >= 0.0),
        detail={"min_log_ratio_increment": float(worst)})


@dataclass
class HolderPrediction:
    exponent: float
    a_prime: float
    a_zero: float
    positive: bool
    note: str = ""


def holder_exponent_prediction(A, r, b=1.0, t=0.0):
    """Predicted Holder exponent s = (a' - ln A)/(a' - ln r).

    a' solves a' = A e^{(1-b)t}(1 - e^{-a'}); a0 is its t -> 0 limit, which
    always exceeds ln A (so s > 0 near the blow-up time).
    """
    if not (A > 1.0 and 0.0 < r <= 0.25):
        raise ValueError("need A > 1 and 0 < r <= 1/4")
    a0 = lower_envelope_limit(A, 1.0, 0.0)
    pref = A * math.exp((1.0 - b) * t)
    if pref <= 1.0:
        return HolderPrediction(exponent=0.0, a_prime=0.0, a_zero=a0,
                                positive=False,
                                note="no positive exponent at this t")
    ap = lower_envelope_limit(A, b, t)
    s = (ap - math.log(A)) / (ap - math.log(r))
    return HolderPrediction(exponent=s, a_prime=ap, a_zero=a0,
                            positive=s > 0.0,
                            note="" if s > 0.0 else "no positive exponent at this t")
