"""Polyhomogeneous symbols of boundary operators and their closed-form differences.

Symbols here are finite sums of isotropic homogeneous terms
``coeff(x) * |xi|**degree`` whose coefficients are sampled on a finite set of
boundary points.  The module also carries the closed forms for the leading
term of the difference between two Dirichlet-to-Neumann symbols: for a
conformal factor equal to one on the boundary, and for two potentials.

Normal-derivative convention
----------------------------
Jets are stored as *outward* normal derivatives ``c_j = d^j c / d nu^j``.
With this convention the leading term of ``Lambda_{cg} - Lambda_g`` when
``c_1 = ... = c_J = 0`` is homogeneous of degree ``-J`` with coefficient::

    alpha_n * (-1/2)**J * c_{J+1},      alpha_n = -(n - 2) / 4

and for ``J = 0`` this is the subprincipal shift ``alpha_n * c_1``.  For two
potentials whose difference ``p = q2 - q1`` has vanishing outward derivatives
below order ``j - 1`` the leading term has degree ``-j`` and coefficient::

    -(-1/2)**j * d^{j-1} p / d nu^{j-1}

(``p / 2`` when ``j = 1``).  Both signs were fixed by comparing against the
radial ODE spectra of :mod:`steklov_lab.modelgeo`; written with the inward
derivative ``d/dx_n = -d/dnu`` they read ``(n-2)/4 (1/2)^J d_n^{J+1} c`` and
``(1/2)^j d_n^{j-1} p``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import NumericalError, PreconditionError

SCHEMA = "symcalc/v1"
JET_KINDS = ("conformal", "potential")
MAX_DEGREE = 1


def _as_field(values, npts=None) -> np.ndarray:
    arr = np.array(values, dtype=float, ndmin=1)
    if arr.ndim != 1:
        raise PreconditionError("coefficient field must be one-dimensional")
    if npts is not None and arr.size == 1 and npts != 1:
        arr = np.full(npts, arr[0])
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HomogeneousTerm:
    """``coeff(x) * |xi|**degree`` on a grid of boundary points."""

    degree: int
    coeff: np.ndarray

    def __post_init__(self):
        if int(self.degree) != self.degree:
            raise PreconditionError(f"degree must be an integer, got {self.degree!r}")
        if self.degree > MAX_DEGREE:
            raise PreconditionError(
                f"degree {self.degree} exceeds {MAX_DEGREE}: boundary DN-type operators have order 1"
            )
        object.__setattr__(self, "degree", int(self.degree))
        object.__setattr__(self, "coeff", _as_field(self.coeff))

    @property
    def npts(self) -> int:
        return self.coeff.size

    def is_zero(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.coeff) <= atol))

    def evaluate(self, point: int, r: float) -> float:
        return float(self.coeff[point] * float(r) ** self.degree)

    def scaled(self, factor: float) -> "HomogeneousTerm":
        return HomogeneousTerm(self.degree, factor * self.coeff)

    def __eq__(self, other):
        if not isinstance(other, HomogeneousTerm):
            return NotImplemented
        return self.degree == other.degree and np.array_equal(self.coeff, other.coeff)

    __hash__ = None


@dataclass(frozen=True)
class PolyhomSymbol:
    """Finite polyhomogeneous symbol in canonical form.

    Terms are sorted by strictly decreasing degree, terms sharing a degree
    are merged and identically-zero terms are dropped, so two symbols are
    equal exactly when their canonical term lists are.
    """

    terms: tuple = ()
    n: int = 3
    grid: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 2:
            raise PreconditionError("dimension n must be at least 2")
        merged: dict[int, np.ndarray] = {}
        npts = None
        for term in self.terms:
            if not isinstance(term, HomogeneousTerm):
                term = HomogeneousTerm(*term)
            if npts is None:
                npts = term.npts
            elif term.npts != npts:
                raise PreconditionError("all terms must be sampled on the same grid")
            merged[term.degree] = merged.get(term.degree, 0.0) + term.coeff
        canon = tuple(
            HomogeneousTerm(d, merged[d])
            for d in sorted(merged, reverse=True)
            if np.any(merged[d] != 0.0)
        )
        object.__setattr__(self, "terms", canon)
        if self.grid is not None:
            object.__setattr__(self, "grid", np.asarray(self.grid))

    @property
    def degrees(self) -> list[int]:
        return [t.degree for t in self.terms]

    @property
    def order(self) -> int | None:
        return self.terms[0].degree if self.terms else None

    def term(self, degree: int) -> HomogeneousTerm | None:
        for t in self.terms:
            if t.degree == degree:
                return t
        return None

    def evaluate(self, point: int, r: float) -> float:
        return symbol_evaluate(self, point, r)

    def __add__(self, other: "PolyhomSymbol") -> "PolyhomSymbol":
        if self.n != other.n:
            raise PreconditionError("cannot add symbols of different dimensions")
        return PolyhomSymbol(self.terms + other.terms, self.n, self.grid)

    def __neg__(self) -> "PolyhomSymbol":
        return PolyhomSymbol(tuple(t.scaled(-1.0) for t in self.terms), self.n, self.grid)

    def __sub__(self, other: "PolyhomSymbol") -> "PolyhomSymbol":
        return self + (-other)

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "kind": "symbol",
            "n": self.n,
            "terms": [{"degree": t.degree, "coeff": t.coeff.tolist()} for t in self.terms],
            "grid": None if self.grid is None else np.asarray(self.grid).tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict | str) -> "PolyhomSymbol":
        if isinstance(doc, str):
            doc = json.loads(doc)
        _check_schema(doc, "symbol")
        terms = tuple(HomogeneousTerm(t["degree"], t["coeff"]) for t in doc["terms"])
        return cls(terms, int(doc["n"]), doc.get("grid"))


@dataclass(frozen=True)
class BoundaryJet:
    """Outward normal-derivative jet ``(c_0, ..., c_J)`` sampled on boundary points.

    ``values[j, i]`` is the ``j``-th outward normal derivative at sample ``i``.
    A conformal jet must have ``c_0 == 1`` everywhere.
    """

    kind: str
    values: np.ndarray
    grid: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in JET_KINDS:
            raise PreconditionError(f"jet kind must be one of {JET_KINDS}, got {self.kind!r}")
        vals = np.array(self.values, dtype=float, ndmin=2)
        if vals.ndim != 2:
            raise PreconditionError("jet values must have shape (order + 1, npts)")
        if self.kind == "conformal" and not np.allclose(vals[0], 1.0, rtol=0.0, atol=1e-12):
            raise PreconditionError("conformal jets require c == 1 on the boundary")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.grid is not None:
            grid = np.asarray(self.grid)
            if len(grid) != vals.shape[1]:
                raise PreconditionError("grid length does not match the number of samples")
            object.__setattr__(self, "grid", grid)

    @property
    def order(self) -> int:
        return self.values.shape[0] - 1

    @property
    def npts(self) -> int:
        return self.values.shape[1]

    def derivative(self, j: int) -> np.ndarray:
        if not 0 <= j <= self.order:
            raise PreconditionError(f"jet of order {self.order} has no derivative of order {j}")
        return self.values[j]

    def first_nonzero_order(self, atol: float = 1e-12) -> int | None:
        start = 1 if self.kind == "conformal" else 0
        for j in range(start, self.order + 1):
            if np.any(np.abs(self.values[j]) > atol):
                return j
        return None

    @classmethod
    def identity(cls, order: int, npts: int, grid=None) -> "BoundaryJet":
        vals = np.zeros((order + 1, npts))
        vals[0] = 1.0
        return cls("conformal", vals, grid)

    @classmethod
    def from_derivatives(cls, kind: str, derivs: Sequence, npts: int | None = None, grid=None):
        """Build a jet from per-order values; scalars are broadcast to ``npts`` points."""
        if npts is None:
            npts = max(np.size(d) for d in derivs)
        rows = [_as_field(d, npts) for d in derivs]
        return cls(kind, np.vstack(rows), grid)

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "kind": self.kind,
            "order": self.order,
            "values": self.values.tolist(),
            "grid": None if self.grid is None else np.asarray(self.grid).tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict | str) -> "BoundaryJet":
        if isinstance(doc, str):
            doc = json.loads(doc)
        _check_schema(doc, None)
        return cls(doc["kind"], doc["values"], doc.get("grid"))


def _check_schema(doc: dict, kind: str | None):
    if doc.get("schema") != SCHEMA:
        raise PreconditionError(f"expected schema {SCHEMA!r}, got {doc.get('schema')!r}")
    if kind is not None and doc.get("kind") != kind:
        raise PreconditionError(f"expected kind {kind!r}, got {doc.get('kind')!r}")


# -- closed forms -------------------------------------------------------------


def alpha(n: int) -> float:
    """Subprincipal factor ``alpha_n = -(n - 2) / 4``."""
    if n < 2:
        raise PreconditionError("dimension n must be at least 2")
    return -(n - 2) / 4.0


def conformal_coefficient(J: int, n: int) -> float:
    """Factor multiplying ``c_{J+1}`` in the degree ``-J`` conformal term."""
    if J < 0:
        raise PreconditionError("order J must be non-negative")
    return alpha(n) * (-0.5) ** J


def potential_coefficient(j: int) -> float:
    """Factor multiplying ``d^{j-1}(q2 - q1)`` in the degree ``-j`` potential term."""
    if j < 1:
        raise PreconditionError("potential order j must be positive")
    return -((-0.5) ** j)


def _require_vanishing(values: np.ndarray, orders: Iterable[int], atol: float, what: str):
    for m in orders:
        if np.any(np.abs(values[m]) > atol):
            raise PreconditionError(
                f"{what}: derivative of order {m} does not vanish (max |.| = {np.abs(values[m]).max():.3e})"
            )


def conformal_leading_term(jet: BoundaryJet, first_nonzero: int, n: int, atol: float = 1e-12) -> HomogeneousTerm:
    """Leading term of ``sigma(Lambda_{cg}) - sigma(Lambda_g)``.

    Parameters
    ----------
    jet : BoundaryJet
        Conformal jet with ``c_1 = ... = c_J = 0``.
    first_nonzero : int
        ``J + 1``, the order of the first derivative allowed to be non-zero.
    n : int
        Dimension of the manifold with boundary.

    Returns
    -------
    HomogeneousTerm
        Degree ``-J`` with coefficient ``alpha_n (-1/2)^J c_{J+1}``.
    """
    if jet.kind != "conformal":
        raise PreconditionError("conformal_leading_term needs a conformal jet")
    if n < 2:
        raise PreconditionError("dimension n must be at least 2")
    if first_nonzero < 1:
        raise PreconditionError("first_nonzero must be a positive integer")
    J = first_nonzero - 1
    _require_vanishing(jet.values, range(1, J + 1), atol, "conformal jet prefix")
    return HomogeneousTerm(-J, conformal_coefficient(J, n) * jet.derivative(J + 1))


def potential_leading_term(jet1: BoundaryJet, jet2: BoundaryJet, order: int, atol: float = 1e-12) -> HomogeneousTerm:
    """Leading term of ``sigma(Lambda_{g,q2}) - sigma(Lambda_{g,q1})`` at degree ``-order``."""
    if jet1.kind != "potential" or jet2.kind != "potential":
        raise PreconditionError("potential_leading_term needs two potential jets")
    if jet1.npts != jet2.npts:
        raise PreconditionError("potential jets are sampled on different grids")
    if jet1.grid is not None and jet2.grid is not None and not np.array_equal(jet1.grid, jet2.grid):
        raise PreconditionError("potential jets are sampled on different grids")
    j = int(order)
    if j < 1:
        raise PreconditionError("order must be a positive integer")
    if min(jet1.order, jet2.order) < j - 1:
        raise PreconditionError(f"jets must reach order {j - 1}")
    diff = jet2.values[: j] - jet1.values[: j]
    _require_vanishing(diff, range(0, j - 1), atol, "potential difference prefix")
    return HomogeneousTerm(-j, potential_coefficient(j) * diff[j - 1])


def subprincipal_difference(jet: BoundaryJet, n: int) -> np.ndarray:
    """``sub(Lambda_{cg}) - sub(Lambda_g) = alpha_n * dc/dnu`` on the sample points."""
    if jet.kind != "conformal":
        raise PreconditionError("subprincipal_difference needs a conformal jet")
    return alpha(n) * jet.derivative(1)


def symbol_evaluate(s: PolyhomSymbol, point: int, r: float) -> float:
    if not r > 0:
        raise PreconditionError("covector norm must be positive; negative-degree terms are singular at zero")
    total = 0.0
    for t in s.terms:
        total += t.coeff[point] * float(r) ** t.degree
    return float(total)


# -- Schrodinger potential of a radial conformal factor -----------------------

# eighth-order central stencils on offsets -4..4
_D1 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
_D2 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])
_OFFSETS = np.arange(-4, 5)


def _fd_derivatives(func: Callable, r: np.ndarray, h: float):
    pts = r[:, None] + h * _OFFSETS[None, :]
    vals = np.asarray(func(pts.ravel()), dtype=float).reshape(pts.shape)
    return vals[:, 4], vals @ _D1 / h, vals @ _D2 / h**2


def conformal_schrodinger_potential(profile: Callable, n: int, r, h: float = 1e-2, smooth_rtol: float = 1e-6,
                                    form: str = "operator") -> np.ndarray:
    """Schrodinger potential attached to a radial conformal factor.

    With ``m = (n-2)/4`` the scaled radial Laplacian
    ``Delta_{cg} u = c^{-1} (u'' + ((n-1)/r + (n-2)/2 * c'/c) u')`` is applied
    to ``u = c^{-m}`` with eighth-order central differences of step ``h``.

    Parameters
    ----------
    profile : callable
        Radial factor ``c(r)``; must be evaluable within ``4h`` of every radius.
    n : int
    r : array_like
        Radii at which the potential is returned.
    form : {"operator", "literal"}
        ``"literal"`` returns ``c^m Delta_{cg}(c^{-m})``.  ``"operator"``
        (default) returns ``c`` times that, which equals
        ``-c^{-m} Delta_g(c^m)`` and is the potential ``q`` for which
        ``Delta_{cg} = c^{-(n+2)/4} (Delta_g + q) c^m`` holds; with it
        ``Lambda_{cg} = Lambda_{g,-q} - (n-2)/4 * dc/dnu`` holds mode by mode.

    Raises
    ------
    PreconditionError
        If the profile is not positive near a requested radius.
    NumericalError
        If derivatives at steps ``h`` and ``2h`` disagree (profile not smooth).
    """
    if form not in ("operator", "literal"):
        raise PreconditionError(f"form must be 'operator' or 'literal', got {form!r}")
    if n < 2:
        raise PreconditionError("dimension n must be at least 2")
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r < 0):
        raise PreconditionError("radii must be non-negative")
    m = (n - 2) / 4.0
    if m == 0.0:
        return np.zeros_like(r)

    stencil = r[:, None] + h * _OFFSETS[None, :]
    cvals = np.asarray(profile(stencil.ravel()), dtype=float)
    if not np.all(np.isfinite(cvals)) or np.any(cvals <= 0):
        raise PreconditionError("conformal profile must be finite and positive near the grid")

    phi = lambda x: np.asarray(profile(x), dtype=float) ** (-m)

    def pieces(step):
        c, dc, _ = _fd_derivatives(profile, r, step)
        u, du, d2u = _fd_derivatives(phi, r, step)
        return c, dc, du, d2u

    c, dc, du, d2u = pieces(h)
    _, dc2, du2, d2u2 = pieces(2 * h)
    scale = 1.0 + np.abs(d2u) + np.abs(du) + np.abs(dc)
    disagreement = np.max(np.abs(d2u - d2u2) + np.abs(du - du2) + np.abs(dc - dc2)) / np.max(scale)
    if disagreement > smooth_rtol:
        raise NumericalError(f"profile does not look smooth at the finite-difference scale ({disagreement:.2e})")

    safe_r = np.where(r > 1e-12, r, 1.0)
    radial = np.where(r > 1e-12, (n - 1) / safe_r * du, (n - 1) * d2u)
    lap = (d2u + radial + 0.5 * (n - 2) * dc / c * du) / c
    q = c**m * lap
    return c * q if form == "operator" else q
