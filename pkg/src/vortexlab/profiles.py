"""Initial-data building blocks and profile analyzers.

All 1D data are built from the standard compactly supported mollifier
g(u) = exp(-1/(1-u^2)) on (-1, 1), affinely mapped and rescaled so the
normalization certificates hold:

  rho     >= 0 on [1-r, 1+r], symmetric about 1, H(rho)(0) = -1/2
  phi(x)  = rho(-x) - rho(x), odd, H(phi)(0) = 1
  w(x, 0) = sum_k A^k phi(x/r^k), disjoint bumps accumulating at 0

plus the axisymmetric pieces: a radial bump with the Beta-weighted
normalization, an even plateau in z, and its odd |z|^{1/12}-type profile
smoothed at the origin by a quintic Hermite blend.

Derivatives of g are exact (polynomial recursion), so every profile
carries a smooth evaluator with derivative access; certificates are
recomputed from the evaluator at test time, never trusted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .hilbert import Field1D, hilbert_pv
from .quadrature import gauss_panel, integrate_certified, integrate_power_kink

_PI = np.pi


class ResolutionError(ValueError):
    """A requested sampling grid under-resolves the innermost bump."""


# ---------------------------------------------------------------------------
# the mollifier and its exact derivatives
# ---------------------------------------------------------------------------

_MAX_ORDER = 4


def _mollifier_polys(n_max=_MAX_ORDER):
    # g^(n)(u) = g(u) R_n(u) / (1-u^2)^(2n),
    # R_{n+1} = (1-u^2)^2 R_n' + (4n u (1-u^2) - 2u) R_n
    s = np.array([1.0, 0.0, -1.0])          # 1 - u^2
    polys = [np.array([1.0])]
    for n in range(n_max):
        Rn = polys[-1]
        term1 = P.polymul(P.polymul(s, s), P.polyder(Rn))
        bracket = P.polyadd(P.polymul([0.0, 4.0 * n], s), [0.0, -2.0])
        term2 = P.polymul(bracket, Rn)
        polys.append(P.polyadd(term1, term2))
    return polys


_R_POLYS = _mollifier_polys()


def mollifier(u, order=0):
    """exp(-1/(1-u^2)) on (-1,1), zero outside; exact derivatives to order 4."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    s = 1.0 - ui * ui
    g = np.exp(-1.0 / s)
    if order == 0:
        out[inside] = g
    else:
        out[inside] = g * P.polyval(ui, _R_POLYS[order]) / s ** (2 * order)
    return out


MOLLIFIER_MASS = None  # integral of g over (-1,1), filled lazily


def _mollifier_mass():
    global MOLLIFIER_MASS
    if MOLLIFIER_MASS is None:
        MOLLIFIER_MASS, _ = integrate_certified(mollifier, -1.0, 1.0, 1e-14)
    return MOLLIFIER_MASS


# ---------------------------------------------------------------------------
# profile objects
# ---------------------------------------------------------------------------


class BumpProfile:
    """Smooth compactly supported profile with derivative access.

    Subclasses implement _value(x, order); outside the declared support the
    profile is identically zero.  `certificates` records normalization
    residuals measured at build time; tests recompute them independently.
    """

    max_order = _MAX_ORDER

    def __init__(self, support, breakpoints=(), name="", params=None):
        self.support = tuple(tuple(map(float, s)) for s in support)
        self.support_hull = (min(s[0] for s in self.support),
                             max(s[1] for s in self.support))
        self.breakpoints = tuple(sorted(set(
            [e for s in self.support for e in s]) | set(breakpoints)))
        self.name = name
        self.params = dict(params or {})
        self.certificates = {}

    def __call__(self, x):
        return self._value(np.asarray(x, dtype=float), 0)

    def derivative(self, x, order=1):
        if order == 0:
            return self(x)
        if order > self.max_order:
            raise ValueError(f"{self.name or type(self).__name__} carries "
                             f"derivatives up to order {self.max_order}")
        return self._value(np.asarray(x, dtype=float), order)

    def sample(self, x_min, x_max, n, time=None):
        return Field1D.from_callable(self, x_min, x_max, n, time)

    # -- measured functionals (certified quadrature over the support) -----

    def integral(self, weight=None, tol=1e-12):
        total = 0.0
        for lo, hi in self.support:
            f = self if weight is None else (lambda y: self(y) * weight(y))
            val, _ = integrate_certified(f, lo, hi, tol,
                                         breakpoints=self.breakpoints)
            total += val
        return total

    def l1_norm(self, tol=1e-12):
        return self.integral(weight=None, tol=tol) if self._nonnegative() \
            else self._abs_integral(tol)

    def _nonnegative(self):
        xs = np.linspace(*self.support_hull, 2048)
        return bool(np.all(self(xs) >= -1e-15))

    def _abs_integral(self, tol):
        total = 0.0
        for lo, hi in self.support:
            val, _ = integrate_certified(lambda y: np.abs(self(y)), lo, hi,
                                         tol, breakpoints=self.breakpoints)
            total += val
        return total

    def l2_norm(self, order=0, tol=1e-12):
        total = 0.0
        for lo, hi in self.support:
            val, _ = integrate_certified(
                lambda y: self._value(np.asarray(y, dtype=float), order) ** 2,
                lo, hi, tol, breakpoints=self.breakpoints)
            total += val
        return math.sqrt(max(total, 0.0))

    def max_abs(self, n_scan=8192):
        xs = np.linspace(*self.support_hull, n_scan)
        v = np.abs(self(xs))
        i = int(np.argmax(v))
        # local parabolic refinement
        if 0 < i < n_scan - 1:
            xl, xc, xr = xs[i - 1 : i + 2]
            fine = np.linspace(xl, xr, 257)
            return float(np.max(np.abs(self(fine))))
        return float(v[i])


class MollifierBump(BumpProfile):
    """amp * g((x - center)/width), support [center-width, center+width]."""

    def __init__(self, center, width, amp=1.0, name="bump"):
        super().__init__([(center - width, center + width)], name=name,
                         params={"center": center, "width": width, "amp": amp})
        self.center, self.width, self.amp = center, width, amp

    def _value(self, x, order):
        u = (x - self.center) / self.width
        return self.amp * mollifier(u, order) / self.width**order


class MirroredOdd(BumpProfile):
    """phi(x) = rho(-x) - rho(x); odd when rho is supported in (0, inf)."""

    def __init__(self, rho: BumpProfile, name="phi"):
        lo, hi = rho.support_hull
        super().__init__([(-hi, -lo), (lo, hi)],
                         breakpoints=[-p for p in rho.breakpoints] + list(rho.breakpoints),
                         name=name, params=dict(rho.params))
        self.rho = rho

    def _value(self, x, order):
        sgn = -1.0 if order % 2 else 1.0
        return sgn * self.rho._value(-x, order) - self.rho._value(x, order)


class ScaledBumpSum(BumpProfile):
    """w(x) = sum_k heights[k] * base(x / scales[k])."""

    def __init__(self, base: BumpProfile, heights, scales, name="multibump"):
        self.base = base
        self.heights = np.asarray(heights, dtype=float)
        self.scales = np.asarray(scales, dtype=float)
        supports = []
        breaks = []
        for s in self.scales:
            for lo, hi in base.support:
                supports.append((lo * s, hi * s))
            breaks.extend(p * s for p in base.breakpoints)
        supports.sort()
        super().__init__(supports, breakpoints=breaks, name=name)

    def _value(self, x, order):
        out = np.zeros_like(x)
        for h, s in zip(self.heights, self.scales):
            out += h * self.base._value(x / s, order) / s**order
        return out


# ---------------------------------------------------------------------------
# 1D construction
# ---------------------------------------------------------------------------


def build_bump(r):
    """Non-negative bump on [1-r, 1+r], symmetric about 1, H(rho)(0) = -1/2.

    The normalization integral of rho(y)/y is pi/2, equivalent to the
    Hilbert certificate under the sign convention used here.
    """
    if not 0.0 < r <= 0.25:
        raise ValueError("need 0 < r <= 1/4")
    raw = MollifierBump(1.0, r, 1.0, name="rho")
    norm, _ = integrate_certified(lambda y: raw(y) / y, 1.0 - r, 1.0 + r, 1e-14)
    rho = MollifierBump(1.0, r, (_PI / 2.0) / norm, name="rho")
    rho.params["r"] = r
    check, _ = integrate_certified(lambda y: rho(y) / y, 1.0 - r, 1.0 + r, 1e-14)
    rho.certificates["weighted_mass_residual"] = abs(check - _PI / 2.0)
    rho.certificates["hilbert_at_zero_residual"] = abs(
        hilbert_pv(rho, 0.0, tol=1e-11) + 0.5)
    return rho


def build_phi(rho):
    """phi = rho(-x) - rho(x): odd, negative on the positive axis, H(phi)(0)=1."""
    phi = MirroredOdd(rho, name="phi")
    phi.certificates["hilbert_at_zero_residual"] = abs(
        hilbert_pv(phi, 0.0, tol=1e-11) - 1.0)
    return phi


@dataclass
class MultiBumpData:
    """w(x, 0) = sum_{k<=n} A^k phi(x / r^k) with per-bump bookkeeping."""

    n: int
    A: float
    r: float
    phi: BumpProfile
    profile: ScaledBumpSum
    bump_supports: list          # [(lo_k, hi_k)] on the positive axis
    gaps: list                   # open intervals between consecutive bumps

    def sup_norm(self):
        return self.A**self.n * self.phi.max_abs()

    def sample(self, x_min, x_max, n_points, min_per_bump=32):
        dx = (x_max - x_min) / (n_points - 1)
        innermost = 2.0 * self.r * self.r**self.n
        if innermost / dx < min_per_bump:
            raise ResolutionError(
                f"innermost bump spans {innermost / dx:.1f} < {min_per_bump} "
                f"grid cells; raise n_points")
        return self.profile.sample(x_min, x_max, n_points, time=0.0)


def assemble_multibump(n, A, r, phi):
    """Disjoint-bump initial datum; r <= 1/4 guarantees the gaps are open."""
    if not (0.0 < r <= 0.25 and A > 1.0 and n >= 0):
        raise ValueError("need r <= 1/4, A > 1, n >= 0")
    heights = A ** np.arange(n + 1)
    scales = r ** np.arange(n + 1)
    prof = ScaledBumpSum(phi, heights, scales, name="multibump")
    supports = [((1.0 - r) * r**k, (1.0 + r) * r**k) for k in range(n + 1)]
    gaps = [((1.0 + r) * r ** (k + 1), (1.0 - r) * r**k) for k in range(n)]
    assert all(lo < hi for lo, hi in gaps)
    return MultiBumpData(n=n, A=A, r=r, phi=phi, profile=prof,
                         bump_supports=supports, gaps=gaps)


def odd_perturbation(r, h1_target, seed, n_lobes=3):
    """Odd smooth perturbation supported inside [1-2r, 1+2r] and its mirror,
    scaled so the H^1-dot seminorm ||d/dx .||_L2 equals h1_target."""
    rng = np.random.default_rng([seed, 1729])
    lo, hi = 1.0 - 1.8 * r, 1.0 + 1.8 * r
    centers = rng.uniform(lo + 0.15 * r, hi - 0.15 * r, n_lobes)
    widths = rng.uniform(0.05 * r, 0.12 * r, n_lobes)
    amps = rng.uniform(-1.0, 1.0, n_lobes)
    right = None
    for c, w, a in zip(centers, widths, amps):
        b = MollifierBump(c, w, a)
        right = b if right is None else _SumProfile(right, b)
    pert = MirroredOdd(_NegateProfile(right), name="perturbation")
    norm = pert.l2_norm(order=1)
    scale = h1_target / norm if norm > 0 else 0.0
    return _ScaledProfile(pert, scale)


class _SumProfile(BumpProfile):
    def __init__(self, f, g):
        hull = (min(f.support_hull[0], g.support_hull[0]),
                max(f.support_hull[1], g.support_hull[1]))
        super().__init__([hull],
                         breakpoints=list(f.breakpoints) + list(g.breakpoints))
        self._f, self._g = f, g

    def _value(self, x, order):
        return self._f._value(x, order) + self._g._value(x, order)


class _NegateProfile(BumpProfile):
    # MirroredOdd computes rho(-x) - rho(x); feeding it -rho yields an odd
    # field equal to rho on the positive axis.
    def __init__(self, f):
        super().__init__([f.support_hull], breakpoints=f.breakpoints)
        self._f = f

    def _value(self, x, order):
        return -self._f._value(x, order)


class _ScaledProfile(BumpProfile):
    def __init__(self, f, scale):
        super().__init__([f.support_hull], breakpoints=f.breakpoints,
                         name=f.name)
        self._f, self._scale = f, scale

    def _value(self, x, order):
        return self._scale * self._f._value(x, order)


class SumProfile(_SumProfile):
    """Public pointwise sum, e.g. phi + perturbation."""


# ---------------------------------------------------------------------------
# analyzers
# ---------------------------------------------------------------------------


def holder_seminorm(f, s, n_samples=4097, lags_per_octave=4):
    """sup |f(x)-f(y)| / |x-y|^s over dyadically stratified sample pairs.

    Returns (value, (x, y)) with the maximizing pair.  The stratification
    keeps the candidate set O(N log N); the reported value is a lower
    bound of the true seminorm, tight up to the lag granularity.
    """
    if not 0.0 < s <= 1.0:
        raise ValueError("need s in (0, 1]")
    if isinstance(f, Field1D):
        x, v = f.x, f.values
    else:
        pad = 0.05 * (f.support_hull[1] - f.support_hull[0])
        x = np.linspace(f.support_hull[0] - pad, f.support_hull[1] + pad,
                        n_samples)
        v = f(x)
    n = v.size
    dx = x[1] - x[0]
    lags, lag = [], 1.0
    ratio = 2.0 ** (1.0 / lags_per_octave)
    while lag < n:
        L = int(round(lag))
        if not lags or L > lags[-1]:
            lags.append(L)
        lag *= ratio
    best, best_pair = 0.0, (x[0], x[0])
    for L in lags:
        d = np.abs(v[L:] - v[:-L])
        i = int(np.argmax(d))
        val = d[i] / (L * dx) ** s
        if val > best:
            best, best_pair = float(val), (float(x[i]), float(x[i + L]))
    return best, best_pair


def support_gaps(w: Field1D, floor):
    """Maximal intervals where |w| < floor."""
    if floor <= 0:
        raise ValueError("floor must be positive")
    quiet = np.abs(w.values) < floor
    x = w.x
    out = []
    start = None
    for i, q in enumerate(quiet):
        if q and start is None:
            start = x[i]
        elif not q and start is not None:
            out.append((start, x[i - 1]))
            start = None
    if start is not None:
        out.append((start, x[-1]))
    return out


def max_quiet(w: Field1D, intervals):
    """Largest |w| sample inside the given intervals (gap-violation probe)."""
    x = w.x
    worst = 0.0
    for lo, hi in intervals:
        sel = (x >= lo) & (x <= hi)
        if np.any(sel):
            worst = max(worst, float(np.max(np.abs(w.values[sel]))))
    return worst


# ---------------------------------------------------------------------------
# axisymmetric building blocks
# ---------------------------------------------------------------------------


def beta_constant():
    """B(25/24, 35/24) via the Gamma function."""
    return math.gamma(25.0 / 24.0) * math.gamma(35.0 / 24.0) / math.gamma(2.5)


def build_phi3d(d):
    """Radial bump on [1-d, 1+d] with (3B/4) * integral r^{-11/12} phi = 1."""
    if not 0.0 < d <= 0.25:
        raise ValueError("need 0 < d <= 1/4")
    B = beta_constant()
    raw = MollifierBump(1.0, d, 1.0, name="phi3d")
    norm, _ = integrate_certified(lambda y: raw(y) * y ** (-11.0 / 12.0),
                                  1.0 - d, 1.0 + d, 1e-14)
    amp = 1.0 / (0.75 * B * norm)
    phi = MollifierBump(1.0, d, amp, name="phi3d")
    phi.params["d"] = d
    check, _ = integrate_certified(lambda y: phi(y) * y ** (-11.0 / 12.0),
                                   1.0 - d, 1.0 + d, 1e-14)
    phi.certificates["beta_normalization_residual"] = abs(0.75 * B * check - 1.0)
    return phi


def _smoothstep(v, order=0):
    """C-infinity step: 0 for v<=0, 1 for v>=1, q(v)/(q(v)+q(1-v)) between."""
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    mid = (v > 0.0) & (v < 1.0)
    if order == 0:
        out[v >= 1.0] = 1.0
    if not np.any(mid):
        return out
    vm = v[mid]

    def q(t, k=0):
        val = np.exp(-1.0 / t)
        if k == 0:
            return val
        if k == 1:
            return val / t**2
        return val * (1.0 - 2.0 * t) / t**4

    a, b = q(vm), q(1.0 - vm)
    if order == 0:
        out[mid] = a / (a + b)
        return out
    da, db = q(vm, 1), -q(1.0 - vm, 1)
    S = a + b
    if order == 1:
        out[mid] = (da * b - a * db) / S**2
        return out
    d2a, d2b = q(vm, 2), q(1.0 - vm, 2)
    dS = da + db
    num = da * b - a * db
    dnum = d2a * b - a * d2b
    out[mid] = (dnum * S - 2.0 * num * dS) / S**3
    return out


class PlateauProfile(BumpProfile):
    """Even profile: 1 on [-Z, Z], smooth decay to 0 on Z < |z| < 2Z."""

    max_order = 2

    def __init__(self, Z):
        if Z <= 0:
            raise ValueError("need Z > 0")
        super().__init__([(-2.0 * Z, 2.0 * Z)],
                         breakpoints=[-Z, Z], name="rho_z", params={"Z": Z})
        self.Z = Z

    def _value(self, z, order):
        Z = self.Z
        az = np.abs(z)
        v = (2.0 * Z - az) / Z          # 1 at |z|=Z, 0 at |z|=2Z
        out = _smoothstep(v, order) * (-1.0 / Z) ** order
        if order > 0:
            out = np.where(az <= Z, 0.0, out * np.sign(z) ** order)
        else:
            out = np.where(az <= Z, 1.0, out)
        return out


# quintic odd Hermite blend matching z^{1/12} with two derivatives at z = h
_BLEND_C1 = 2065.0 / 1152.0
_BLEND_C3 = -649.0 / 576.0
_BLEND_C5 = 385.0 / 1152.0


class SmoothedOddPower(BumpProfile):
    """rho_z(z) |z|^{1/12} sgn z away from 0, odd quintic inside [-h, h].

    The blend matches value, slope and curvature at z = +-h (computable in
    closed form because rho_z = 1 there), keeping C^2 regularity at the
    seam for every quadrature used downstream.
    """

    max_order = 2
    power = 1.0 / 12.0

    def __init__(self, rho_z: PlateauProfile, h):
        if not 0.0 < h < rho_z.Z:
            raise ValueError("smoothing window must satisfy 0 < h < Z")
        super().__init__([(-2.0 * rho_z.Z, 2.0 * rho_z.Z)],
                         breakpoints=[-rho_z.Z, rho_z.Z, -h, h],
                         name="rho_k", params={"Z": rho_z.Z, "h": h})
        self.rho_z = rho_z
        self.h = h

    def _blend(self, z, order):
        h, p = self.h, self.power
        v = z / h
        if order == 0:
            return h**p * (_BLEND_C1 * v + _BLEND_C3 * v**3 + _BLEND_C5 * v**5)
        if order == 1:
            return h ** (p - 1) * (_BLEND_C1 + 3 * _BLEND_C3 * v**2
                                   + 5 * _BLEND_C5 * v**4)
        return h ** (p - 2) * (6 * _BLEND_C3 * v + 20 * _BLEND_C5 * v**3)

    def _outer(self, z, order):
        # d^order [ rho_z(z) * sgn(z) |z|^p ] by the product rule
        p = self.power
        az = np.abs(z)
        sz = np.sign(z)
        pw = [sz * az**p, p * az ** (p - 1.0),
              p * (p - 1.0) * sz * az ** (p - 2.0)]
        if order == 0:
            return self.rho_z._value(z, 0) * pw[0]
        if order == 1:
            return (self.rho_z._value(z, 1) * pw[0]
                    + self.rho_z._value(z, 0) * pw[1])
        return (self.rho_z._value(z, 2) * pw[0]
                + 2.0 * self.rho_z._value(z, 1) * pw[1]
                + self.rho_z._value(z, 0) * pw[2])

    def _value(self, z, order):
        inner = np.abs(z) <= self.h
        out = np.empty_like(z)
        out[inner] = self._blend(z[inner], order)
        out[~inner] = self._outer(z[~inner], order)
        return out


def build_rho_z(Z):
    return PlateauProfile(Z)


def smooth_rho(rho_z: PlateauProfile, k, eps_s, a):
    """rho_k: the odd |z|^{1/12}-profile smoothed on [-h_k, h_k], h_k = eps_s e^{-6ak}."""
    if eps_s <= 0 or a <= 0 or k < 0:
        raise ValueError("need eps_s > 0, a > 0, k >= 0")
    h = eps_s * math.exp(-6.0 * a * k)
    if h >= rho_z.Z:
        raise ValueError("smoothing window too large: h_k >= Z")
    return SmoothedOddPower(rho_z, h)


def smoothing_perturbation_integral(phi3d, rho_k: SmoothedOddPower, K,
                                    n_gauss=48):
    """integral of r^2 z phi(r) |rho(Kz)(Kz)^{1/12} - rho_k(Kz)| / (z^2+r^2)^{5/2}.

    The integrand vanishes for |Kz| > h, so the z-range is [0, h/K]; the
    power kink at z = 0 is handled by substitution.  Returns the value,
    to be compared with the bound 16 h^{25/12} / (25 K^2 B).
    """
    h = rho_k.h
    z_hi = h / K
    rlo, rhi = phi3d.support_hull

    def inner(z):
        # Gauss in r for a batch of z values
        rx, rw = np.polynomial.legendre.leggauss(n_gauss)
        rm, rh = 0.5 * (rlo + rhi), 0.5 * (rhi - rlo)
        r = rm + rh * rx
        Z, R = np.meshgrid(z, r, indexing="ij")
        kz = K * Z
        diff = np.abs(kz ** rho_k.power - rho_k(kz))
        kern = R**2 * Z * phi3d(R)[None, :] / (Z**2 + R**2) ** 2.5
        return rh * np.sum(kern * diff * rw[None, :], axis=1)

    return integrate_power_kink(inner, z_hi, 1.0 + rho_k.power, n=n_gauss)


def smoothing_bound(h, K):
    return 16.0 * h ** (25.0 / 12.0) / (25.0 * K**2 * beta_constant())
