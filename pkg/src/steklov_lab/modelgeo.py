"""Steklov spectra of model manifolds.

Exact spectra for the disk, the 3-ball and flat cylinders, plus radial ODE
solvers for the ball carrying a radial conformal factor ``c(r)`` or a radial
potential ``q(r)``.

Mode equations
--------------
For a separated solution ``u = f(r) Y_k`` write ``f = r**k h``.  Harmonicity
for the metric ``c g`` (``n`` the dimension) and the Schrodinger equation
``(-Delta + q) u = 0`` both reduce to::

    h'' + ((2k + n - 1)/r + s) h' + (k s / r - q) h = 0

with ``s = (n-2)/2 * c'/c, q = 0`` in the conformal case and ``s = 0`` in the
potential case.  The Steklov eigenvalue of the mode is
``sigma_k = f'(1)/f(1) = k + h'(1)/h(1)`` because ``c(1) = 1``.

Two independent integrators are provided.  ``"linear-bdf"`` integrates the
linear system for ``(h, r h')`` in ``x = log r`` with a BDF scheme, all modes
at once with a sparse block Jacobian.  ``"riccati-radau"`` integrates the
Riccati equation for ``r h'/h`` in ``r`` with an implicit Runge-Kutta
scheme.  Both start at ``r0`` from the two-term Frobenius expansion, which
keeps the regular singular point at the origin out of the integration.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import sympy as sp
from scipy import sparse
from scipy.integrate import solve_ivp

from .errors import (
    DirichletEigenvalueError,
    NumericalError,
    PreconditionError,
    RankDeficiencyError,
)

SUPPORTED_DIMS = (2, 3)
SCHEMES = ("linear-bdf", "riccati-radau")
SPECTRUM_SCHEMA = "spectrum/v1"
DEFAULT_RTOL = 1e-11
DIRICHLET_THRESHOLD = 1e-8
R0 = 1e-3

_r = sp.Symbol("r", real=True)


# -- spectra ------------------------------------------------------------------


@dataclass(frozen=True)
class SteklovSpectrum:
    """Sorted eigenvalues with multiplicities.

    Parameters
    ----------
    sigma : array_like
        Distinct eigenvalues, non-decreasing.
    multiplicity : array_like of int
        Positive multiplicities aligned with ``sigma``.
    n : int
        Dimension of the manifold whose boundary carries the DN map.
    provenance : {"exact", "ode", "synthetic"}
    """

    sigma: np.ndarray
    multiplicity: np.ndarray
    n: int
    provenance: str = "exact"

    def __post_init__(self):
        sig = np.array(self.sigma, dtype=float, ndmin=1)
        mult = np.array(self.multiplicity, dtype=np.int64, ndmin=1)
        if sig.shape != mult.shape or sig.ndim != 1:
            raise PreconditionError("sigma and multiplicity must be aligned 1-d sequences")
        if not np.all(np.isfinite(sig)):
            raise PreconditionError("eigenvalues must be finite")
        if np.any(np.diff(sig) < 0):
            raise PreconditionError("eigenvalues must be non-decreasing")
        if np.any(mult < 1):
            raise PreconditionError("multiplicities must be positive")
        if self.provenance == "exact" and np.any(sig < 0):
            raise PreconditionError("exact Steklov eigenvalues are non-negative")
        if self.provenance not in ("exact", "ode", "synthetic"):
            raise PreconditionError(f"unknown provenance {self.provenance!r}")
        sig.setflags(write=False)
        mult.setflags(write=False)
        object.__setattr__(self, "sigma", sig)
        object.__setattr__(self, "multiplicity", mult)

    @classmethod
    def from_values(cls, values, n: int, provenance: str = "exact", merge_rtol: float = 1e-12):
        """Group a list of eigenvalues (repeats allowed) into distinct entries."""
        vals = np.sort(np.asarray(values, dtype=float).ravel())
        sig: list[float] = []
        mult: list[int] = []
        for v in vals:
            if sig and abs(v - sig[-1]) <= merge_rtol * max(1.0, abs(v)):
                mult[-1] += 1
            else:
                sig.append(float(v))
                mult.append(1)
        return cls(np.array(sig), np.array(mult, dtype=np.int64), n, provenance)

    @classmethod
    def empty(cls, n: int = 2) -> "SteklovSpectrum":
        return cls(np.zeros(0), np.zeros(0, dtype=np.int64), n, "synthetic")

    def __len__(self) -> int:
        return self.sigma.size

    @property
    def entries(self) -> list[tuple[float, int]]:
        return list(zip(self.sigma.tolist(), self.multiplicity.tolist()))

    @property
    def total(self) -> int:
        return int(self.multiplicity.sum())

    @property
    def sigma_max(self) -> float:
        return float(self.sigma[-1]) if len(self) else 0.0

    def expanded(self) -> np.ndarray:
        """Eigenvalues repeated according to multiplicity."""
        return np.repeat(self.sigma, self.multiplicity)

    def counting(self, sigma) -> np.ndarray:
        """``#{k : sigma_k <= sigma}`` counted with multiplicity."""
        cum = np.concatenate([[0], np.cumsum(self.multiplicity)])
        return cum[np.searchsorted(self.sigma, np.asarray(sigma, dtype=float), side="right")]

    def truncate(self, sigma_max: float) -> "SteklovSpectrum":
        keep = self.sigma <= sigma_max
        return SteklovSpectrum(self.sigma[keep], self.multiplicity[keep], self.n, self.provenance)

    def conjugate(self) -> "SteklovSpectrum":
        """Spectrum ``{-sigma}``; used to check the conjugate symmetry of traces."""
        return SteklovSpectrum(-self.sigma[::-1], self.multiplicity[::-1], self.n, "synthetic")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sigma", "multiplicity"])
        for s, m in self.entries:
            w.writerow([repr(s), m])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, n: int, provenance: str = "exact") -> "SteklovSpectrum":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [h.strip() for h in rows[0]] != ["sigma", "multiplicity"]:
            raise PreconditionError('spectrum CSV must start with the header "sigma,multiplicity"')
        body = [r for r in rows[1:] if r]
        sig = [float(r[0]) for r in body]
        mult = [int(r[1]) for r in body]
        return cls(np.array(sig), np.array(mult, dtype=np.int64), n, provenance)

    def to_json(self) -> dict:
        return {
            "schema": SPECTRUM_SCHEMA,
            "n": self.n,
            "provenance": self.provenance,
            "entries": [[s, m] for s, m in self.entries],
        }

    @classmethod
    def from_json(cls, doc) -> "SteklovSpectrum":
        if isinstance(doc, str):
            doc = json.loads(doc)
        if doc.get("schema") != SPECTRUM_SCHEMA:
            raise PreconditionError(f"expected schema {SPECTRUM_SCHEMA!r}")
        ent = doc["entries"]
        return cls(
            np.array([e[0] for e in ent], dtype=float),
            np.array([e[1] for e in ent], dtype=np.int64),
            int(doc["n"]),
            doc["provenance"],
        )


def _check_dim(n: int):
    if n not in SUPPORTED_DIMS:
        raise PreconditionError(f"only n in {SUPPORTED_DIMS} is supported, got {n}")


def ball_multiplicity(k, n: int):
    """Multiplicity of the degree-``k`` harmonics on the boundary sphere."""
    _check_dim(n)
    k = np.asarray(k)
    if n == 2:
        return np.where(k == 0, 1, 2)
    return 2 * k + 1


def ball_steklov_exact(n: int, kmax: int) -> SteklovSpectrum:
    """Steklov spectrum ``sigma_k = k`` of the unit ball, ``0 <= k <= kmax``."""
    _check_dim(n)
    if kmax < 0:
        raise PreconditionError("kmax must be non-negative")
    k = np.arange(kmax + 1)
    return SteklovSpectrum(k.astype(float), ball_multiplicity(k, n), n, "exact")


def circle_eigenvalues(kmax: int) -> np.ndarray:
    """Laplace eigenvalues ``k**2`` of the unit circle, repeated by multiplicity."""
    k = np.arange(kmax + 1)
    return np.repeat(k.astype(float) ** 2, np.where(k == 0, 1, 2))


def cylinder_steklov(L: float, boundary_eigenvalues: Sequence[float], n: int = 2) -> SteklovSpectrum:
    """Steklov spectrum of ``[0, L] x N`` from the Laplace eigenvalues of ``N``.

    Each eigenvalue ``lam`` of the cross-section contributes the pair
    ``sqrt(lam) tanh(sqrt(lam) L/2)`` (even in t) and
    ``sqrt(lam) coth(sqrt(lam) L/2)`` (odd in t); ``lam = 0`` gives 0 and 2/L.
    Repeated ``lam`` encode multiplicities.
    """
    if not L > 0:
        raise PreconditionError("cylinder length L must be positive")
    lam = np.asarray(boundary_eigenvalues, dtype=float).ravel()
    if np.any(lam < 0):
        raise PreconditionError("boundary Laplace eigenvalues must be non-negative")
    if np.any(np.diff(lam) < 0):
        raise PreconditionError("boundary eigenvalues must be sorted")
    vals = []
    for lv in lam:
        if lv == 0.0:
            vals.extend([0.0, 2.0 / L])
        else:
            w = math.sqrt(lv)
            x = w * L / 2
            vals.extend([w * math.tanh(x), w / math.tanh(x)])
    return SteklovSpectrum.from_values(vals, n, "exact")


# -- radial profiles ----------------------------------------------------------


class RadialProfile:
    """Smooth radial function on ``[0, 1]`` backed by a sympy expression in ``r``.

    Numeric evaluators for any derivative order are generated on demand.
    """

    def __init__(self, expr, name: str | None = None):
        if isinstance(expr, str):
            expr = sp.sympify(expr, locals={"r": _r})
        expr = sp.sympify(expr)
        extra = expr.free_symbols - {_r}
        if extra:
            raise PreconditionError(f"profile depends on symbols other than r: {sorted(map(str, extra))}")
        self.expr = expr
        self.name = name or str(expr)
        self._cache: dict[int, Callable] = {}

    def __repr__(self):
        return f"RadialProfile({self.name!r})"

    def derivative(self, m: int) -> Callable:
        if m not in self._cache:
            f = sp.lambdify(_r, sp.diff(self.expr, _r, m), "numpy")
            self._cache[m] = lambda x, f=f: np.broadcast_to(np.asarray(f(np.asarray(x, dtype=float)), dtype=float), np.shape(x)).copy()
        return self._cache[m]

    def value(self, r):
        return self.derivative(0)(r)

    def d1(self, r):
        return self.derivative(1)(r)

    def d2(self, r):
        return self.derivative(2)(r)

    __call__ = value

    def at_boundary(self, m: int = 0) -> float:
        """``m``-th radial derivative at ``r = 1``, which is the outward normal derivative."""
        return float(sp.diff(self.expr, _r, m).subs(_r, 1))

    def is_conformal_admissible(self, npts: int = 401, atol: float = 1e-12) -> bool:
        vals = self.value(np.linspace(0.0, 1.0, npts))
        return bool(np.all(vals > 0) and abs(self.at_boundary(0) - 1.0) <= atol)

    # presets
    @classmethod
    def constant(cls, value: float = 1.0) -> "RadialProfile":
        return cls(sp.Float(value) if value != 1 else sp.Integer(1), name=f"const({value})")

    @classmethod
    def polynomial(cls, coeffs: Sequence[float], name: str | None = None) -> "RadialProfile":
        """``sum coeffs[i] * r**i``."""
        expr = sum(sp.nsimplify(c) * _r**i for i, c in enumerate(coeffs))
        return cls(expr, name or f"poly{list(coeffs)}")

    @classmethod
    def normal_slope(cls, a: float) -> "RadialProfile":
        """``1 + (a/2)(r**2 - 1)``: equal to 1 at the boundary with outward slope ``a``."""
        a = sp.nsimplify(a)
        return cls(1 + a / 2 * (_r**2 - 1), name=f"normal_slope({a})")

    @classmethod
    def matched_jet(cls, order: int, eps: float) -> "RadialProfile":
        """``1 + eps (1-r**2)**(J+1) / (2**(J+1) (J+1)!)``.

        Radial derivatives of orders ``1..J`` vanish at ``r = 1`` and the
        ``(J+1)``-th equals ``(-1)**(J+1) * eps``, i.e. ``eps`` in the inward
        normal direction.
        """
        J = int(order)
        if J < 0:
            raise PreconditionError("matched order must be non-negative")
        eps = sp.nsimplify(eps)
        expr = 1 + eps * (1 - _r**2) ** (J + 1) / (2 ** (J + 1) * sp.factorial(J + 1))
        return cls(expr, name=f"matched_jet({J},{eps})")

    @classmethod
    def preset(cls, name: str, **params) -> "RadialProfile":
        if name not in PRESETS:
            raise PreconditionError(f"unknown profile preset {name!r}; known: {sorted(PRESETS)}")
        return PRESETS[name](**params)


PRESETS: dict[str, Callable[..., RadialProfile]] = {
    "identity": lambda: RadialProfile.constant(1.0),
    "constant": lambda value=1.0: RadialProfile.constant(value),
    "bump": lambda: RadialProfile(1 + (1 - _r) ** 2, name="1+(1-r)^2"),
    "exp": lambda: RadialProfile(sp.exp(1 - _r**2), name="exp(1-r^2)"),
    "normal_slope": lambda a=0.1: RadialProfile.normal_slope(a),
    "matched_jet": lambda order=1, eps=0.5: RadialProfile.matched_jet(order, eps),
    "r2": lambda: RadialProfile(_r**2, name="r^2"),
}


def _as_profile(p) -> RadialProfile:
    if isinstance(p, RadialProfile):
        return p
    if isinstance(p, (int, float)):
        return RadialProfile.constant(float(p))
    return RadialProfile(p)


# -- radial mode solvers ------------------------------------------------------


def _solve_linear_bdf(s_fun, q_fun, n, ks, rtol, max_step, r0, track_dirichlet):
    K = ks.size

    def rhs(x, y):
        r = math.exp(x)
        h, H = y[:K], y[K:]
        s, q = s_fun(r), q_fun(r)
        return np.concatenate([H, -(2 * ks + n - 2) * H - r * s * H - ks * r * s * h + r * r * q * h])

    eye = sparse.identity(K, format="csc")

    def jac(x, y):
        r = math.exp(x)
        s, q = s_fun(r), q_fun(r)
        lower = sparse.diags(-ks * r * s + r * r * q)
        diag = sparse.diags(-(2 * ks + n - 2) - r * s)
        return sparse.bmat([[None, eye], [lower, diag]], format="csc")

    s0, q0 = s_fun(r0), q_fun(r0)
    # Frobenius start: h = 1 + O(r^2), H = r h' = r (r q - k s) / (2k + n)
    y0 = np.concatenate([np.ones(K), r0 * (r0 * q0 - ks * s0) / (2 * ks + n)])
    sol = solve_ivp(
        rhs, (math.log(r0), 0.0), y0, method="BDF", jac=jac, rtol=rtol, atol=rtol * 1e-3,
        max_step=max_step if max_step else np.inf,
    )
    if not sol.success:
        raise NumericalError(f"mode integration failed: {sol.message}")
    h_end, H_end = sol.y[:K, -1], sol.y[K:, -1]
    if track_dirichlet:
        # f = r^k h; its sup over the path guards against Dirichlet resonance
        rr = np.exp(sol.t)
        f = sol.y[:K] * rr[None, :] ** ks[:, None]
        fmax = np.max(np.abs(f), axis=1)
        bad = np.abs(h_end) < DIRICHLET_THRESHOLD * fmax
        if np.any(bad):
            raise DirichletEigenvalueError(
                f"mode(s) {ks[bad].astype(int).tolist()} are at a Dirichlet eigenvalue: |f(1)| below threshold"
            )
    return ks + H_end / h_end


def _solve_riccati_radau(s_fun, q_fun, n, ks, rtol, max_step, r0):
    K = ks.size

    def rhs(r, d):
        s, q = s_fun(r), q_fun(r)
        return -((2 * ks + n - 2) * d + d * d) / r - s * (ks + d) + r * q

    def jac(r, d):
        s = s_fun(r)
        return sparse.diags(-((2 * ks + n - 2) + 2 * d) / r - s, format="csc")

    s0, q0 = s_fun(r0), q_fun(r0)
    d0 = r0 * r0 * (q0 - ks * s0 / r0) / (2 * ks + n)
    sol = solve_ivp(
        rhs, (r0, 1.0), d0, method="Radau", jac=jac, rtol=rtol, atol=rtol * 1e-3,
        max_step=max_step if max_step else np.inf,
    )
    if not sol.success or not np.all(np.isfinite(sol.y[:, -1])):
        raise NumericalError(f"Riccati integration failed (mode function may vanish): {sol.message}")
    return ks + sol.y[:, -1]


def _solve_modes(s_fun, q_fun, n, ks, scheme, rtol, max_step, r0, track_dirichlet):
    ks = np.atleast_1d(np.asarray(ks, dtype=float))
    if np.any(ks < 0) or np.any(ks != np.round(ks)):
        raise PreconditionError("mode degrees must be non-negative integers")
    if scheme == "linear-bdf":
        return _solve_linear_bdf(s_fun, q_fun, n, ks, rtol, max_step, r0, track_dirichlet)
    if scheme == "riccati-radau":
        return _solve_riccati_radau(s_fun, q_fun, n, ks, rtol, max_step, r0)
    raise PreconditionError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")


def _check_conformal(profile: RadialProfile):
    grid = np.linspace(0.0, 1.0, 401)
    vals = profile.value(grid)
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        raise PreconditionError(f"conformal profile {profile.name} is not positive on [0, 1]")
    if abs(profile.at_boundary(0) - 1.0) > 1e-12:
        raise PreconditionError(f"conformal profile {profile.name} must equal 1 at r = 1")


def radial_conformal_modes(profile, ks, n: int, scheme: str = "linear-bdf", rtol: float = DEFAULT_RTOL,
                           max_step: float | None = None, r0: float = R0) -> np.ndarray:
    """Steklov eigenvalues of the modes ``ks`` for the metric ``c g`` on the unit ball.

    Parameters
    ----------
    profile : RadialProfile or sympy expression in ``r``
        Positive conformal factor with ``c(1) = 1``.
    ks : array_like of int
        Spherical-harmonic degrees.
    n : {2, 3}
    scheme : {"linear-bdf", "riccati-radau"}
        Integrator; the two are independent and cross-check each other.
    rtol : float
        Relative tolerance of the integrator.
    max_step : float, optional
        Cap on the step size in the integration variable.

    Returns
    -------
    ndarray
        ``sigma_k`` for each requested degree.
    """
    _check_dim(n)
    profile = _as_profile(profile)
    _check_conformal(profile)
    if n == 2:
        s_fun = lambda r: 0.0
    else:
        val, d1 = profile.derivative(0), profile.derivative(1)
        half = (n - 2) / 2.0
        s_fun = lambda r: half * float(d1(r)) / float(val(r))
    q_fun = lambda r: 0.0
    return _solve_modes(s_fun, q_fun, n, ks, scheme, rtol, max_step, r0, track_dirichlet=False)


def radial_conformal_mode(profile, k: int, n: int, **kw) -> float:
    return float(radial_conformal_modes(profile, [k], n, **kw)[0])


def radial_potential_modes(qprofile, ks, n: int, scheme: str = "linear-bdf", rtol: float = DEFAULT_RTOL,
                           max_step: float | None = None, r0: float = R0) -> np.ndarray:
    """Steklov eigenvalues of the modes ``ks`` for ``-Delta + q`` on the unit ball.

    ``qprofile`` may be a :class:`RadialProfile`, a sympy expression, a number
    or a plain callable ``q(r)``.

    Raises
    ------
    DirichletEigenvalueError
        When ``|f(1)| < 1e-8 * max |f|`` for some mode (0 is, numerically, a
        Dirichlet eigenvalue).
    """
    _check_dim(n)
    if callable(qprofile) and not isinstance(qprofile, RadialProfile):
        q_fun = lambda r: float(qprofile(r))
    else:
        qp = _as_profile(qprofile)
        qv = qp.derivative(0)
        q_fun = lambda r: float(qv(r))
    s_fun = lambda r: 0.0
    return _solve_modes(s_fun, q_fun, n, ks, scheme, rtol, max_step, r0, track_dirichlet=True)


def radial_potential_mode(qprofile, k: int, n: int, **kw) -> float:
    return float(radial_potential_modes(qprofile, [k], n, **kw)[0])


def conformal_ball_spectrum(profile, n: int, kmax: int, **kw) -> SteklovSpectrum:
    """Full spectrum up to degree ``kmax`` of the ball with metric ``c g``."""
    if kmax < 0:
        raise PreconditionError("kmax must be non-negative")
    k = np.arange(kmax + 1)
    sig = radial_conformal_modes(profile, k, n, **kw)
    return _spectrum_from_modes(sig, ball_multiplicity(k, n), n)


def potential_ball_spectrum(qprofile, n: int, kmax: int, **kw) -> SteklovSpectrum:
    if kmax < 0:
        raise PreconditionError("kmax must be non-negative")
    k = np.arange(kmax + 1)
    sig = radial_potential_modes(qprofile, k, n, **kw)
    return _spectrum_from_modes(sig, ball_multiplicity(k, n), n)


def _spectrum_from_modes(sig, mult, n) -> SteklovSpectrum:
    vals = np.repeat(sig, mult)
    return SteklovSpectrum.from_values(vals, n, "ode")


# -- asymptotic fits ----------------------------------------------------------


@dataclass(frozen=True)
class AsymptoticFit:
    """Least-squares fit of ``sum_i coeffs[i] / k**i``."""

    coefficients: np.ndarray
    residual: float
    k_range: tuple
    npoints: int = 0
    singular_values: np.ndarray = field(default=None, repr=False)

    @property
    def A(self) -> float:
        return float(self.coefficients[0])

    @property
    def B(self) -> float:
        return float(self.coefficients[1]) if self.coefficients.size > 1 else 0.0

    @property
    def C(self) -> float:
        return float(self.coefficients[2]) if self.coefficients.size > 2 else 0.0


def asymptotic_fit(ks, deltas, order: int = 3, k_min: float = 20, k_max: float | None = None,
                   weights=None, rcond: float = 1e-12) -> AsymptoticFit:
    """Fit ``deltas ~ A + B/k + C/k**2 + ...`` with ``order`` coefficients.

    Points with ``k < k_min`` (or ``k > k_max``) are discarded; at least
    ``3 * order`` distinct degrees must remain.
    """
    ks = np.asarray(ks, dtype=float).ravel()
    d = np.asarray(deltas, dtype=float).ravel()
    if ks.shape != d.shape:
        raise PreconditionError("ks and deltas must have the same length")
    if order < 1:
        raise PreconditionError("model order must be at least 1")
    sel = ks >= k_min
    if k_max is not None:
        sel &= ks <= k_max
    ks, d = ks[sel], d[sel]
    w = np.ones_like(ks) if weights is None else np.asarray(weights, dtype=float).ravel()[sel]
    if np.unique(ks).size != ks.size:
        raise PreconditionError("k values must be distinct")
    if ks.size < 3 * order:
        raise PreconditionError(f"need at least {3 * order} points with k >= {k_min}, got {ks.size}")
    design = ks[:, None] ** -np.arange(order)[None, :]
    sw = np.sqrt(w)[:, None]
    a = design * sw
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[-1] <= rcond * sv[0]:
        raise RankDeficiencyError(f"design matrix is rank deficient (cond {sv[0] / max(sv[-1], 1e-300):.2e})")
    coef, *_ = np.linalg.lstsq(a, d * sw[:, 0], rcond=None)
    resid = float(np.linalg.norm(design @ coef - d))
    return AsymptoticFit(coef, resid, (float(ks.min()), float(ks.max())), int(ks.size), sv)
