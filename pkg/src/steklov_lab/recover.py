"""Order-by-order recovery of boundary jets from closed-geodesic invariants.

The difference of two boundary jets (conformal factors equal to 1 on the
boundary, or two potentials) is read off from per-geodesic data:

* order 0 (conformal only): phases ``exp(-i alpha_n l I(c_1))``, inverted on
  the principal branch of the argument;
* order ``J >= 1``: geodesic averages of the degree ``-J`` coefficient of the
  DN symbol difference, divided by the closed-form factor from
  :mod:`steklov_lab.symcalc`.

Each order is an X-ray inversion.  Orders are processed in sequence and the
walk stops at the first non-zero order, since the closed forms only hold
while all lower orders vanish.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import symcalc
from .anosovgeo import ClosedGeodesicClass, XRaySystem, xray_invert
from .errors import (
    BranchViolationError,
    DimensionObstructionError,
    PreconditionError,
)

RECOVER_SCHEMA = "recover/v1"
ZERO_TOL = 1e-9


# -- jets on the surface ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SurfaceJet:
    """Normal-derivative jet of a conformal factor or potential on the boundary surface.

    ``coefficients[m]`` holds the basis coefficients of the ``m``-th outward
    normal derivative.  For conformal jets row 0 stores ``c - 1`` on the
    boundary and must vanish.
    """

    kind: str
    coefficients: np.ndarray
    basis: object = field(repr=False, default=None)

    def __post_init__(self):
        if self.kind not in symcalc.JET_KINDS:
            raise PreconditionError(f"jet kind must be one of {symcalc.JET_KINDS}")
        coef = np.array(self.coefficients, dtype=float, ndmin=2)
        if self.kind == "conformal" and np.any(np.abs(coef[0]) > 1e-12):
            raise PreconditionError("conformal jets require c == 1 on the boundary (row 0 must vanish)")
        if self.basis is not None and coef.shape[1] != len(self.basis):
            raise PreconditionError("coefficient rows do not match the basis size")
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)

    @property
    def order(self) -> int:
        return self.coefficients.shape[0] - 1

    @classmethod
    def zeros(cls, kind: str, order: int, basis) -> "SurfaceJet":
        return cls(kind, np.zeros((order + 1, len(basis))), basis)

    @classmethod
    def planted(cls, kind: str, order: int, row: int, coeffs, basis) -> "SurfaceJet":
        """Jet whose only non-zero row is ``row`` (the ``row``-th normal derivative)."""
        coef = np.zeros((order + 1, len(basis)))
        coef[row] = coeffs
        return cls(kind, coef, basis)

    def row(self, m: int) -> np.ndarray:
        if m > self.order:
            return np.zeros(self.coefficients.shape[1])
        return self.coefficients[m]

    def __sub__(self, other: "SurfaceJet") -> "SurfaceJet":
        if self.kind != other.kind:
            raise PreconditionError("cannot subtract jets of different kinds")
        if self.basis is not other.basis:
            raise PreconditionError("jets are expanded in different bases")
        rows = max(self.order, other.order) + 1
        a = np.zeros((rows, self.coefficients.shape[1]))
        b = np.zeros_like(a)
        a[: self.order + 1] = self.coefficients
        b[: other.order + 1] = other.coefficients
        return SurfaceJet(self.kind, a - b, self.basis)

    def to_boundary_jet(self, points) -> symcalc.BoundaryJet:
        """Sample the jet at boundary points (complex upper half-plane coordinates)."""
        pts = np.atleast_1d(np.asarray(points, dtype=complex))
        vals = self.basis.evaluate(pts) @ self.coefficients.T
        vals = vals.T.copy()
        if self.kind == "conformal":
            vals[0] += 1.0
        return symcalc.BoundaryJet(self.kind, vals, pts)


# -- invariant tables ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class InvariantTable:
    """Per-class invariants, one array per homogeneity order.

    ``phases`` (conformal only) are the order-0 unit-modulus values;
    ``values[J]`` are real geodesic averages of the degree ``-J`` symbol
    difference.  ``source`` is ``"synthetic"`` or ``"experimental"``.
    """

    classes: tuple
    kind: str
    n: int
    phases: np.ndarray | None
    values: dict
    source: str = "synthetic"

    def __post_init__(self):
        m = len(self.classes)
        if self.phases is not None:
            ph = np.asarray(self.phases, dtype=complex)
            if ph.shape != (m,):
                raise PreconditionError("one phase per class is required")
            if np.any(np.abs(np.abs(ph) - 1.0) > 1e-9):
                raise PreconditionError("order-0 invariants must have unit modulus")
            object.__setattr__(self, "phases", ph)
        vals = {}
        for J, v in self.values.items():
            arr = np.asarray(v, dtype=float)
            if arr.shape != (m,):
                raise PreconditionError(f"order {J}: one value per class is required")
            vals[int(J)] = arr
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "classes", tuple(self.classes))

    @property
    def lengths(self) -> np.ndarray:
        return np.array([c.length for c in self.classes])

    @property
    def orders(self) -> list[int]:
        out = sorted(self.values)
        return ([0] + out) if self.phases is not None else out

    @classmethod
    def from_wave_amplitudes(cls, amplitudes: dict, classes, kind: str, n: int, phases=None) -> "InvariantTable":
        """Experimental: turn singularity amplitudes into geodesic averages.

        Each amplitude is divided by ``i * wave_prefactor`` and by the length
        of the class.
        """
        classes = tuple(classes)
        pref = np.array([wave_prefactor(c) for c in classes])
        L = np.array([c.length for c in classes])
        vals = {J: np.real(np.asarray(a, dtype=complex) / (1j * pref) / L) for J, a in amplitudes.items()}
        return cls(classes, kind, n, phases, vals, "experimental")


def wave_prefactor(cls: ClosedGeodesicClass) -> float:
    """``T# / |det(Id - P)|**(1/2)`` with Morse index 0 (constant curvature -1)."""
    return cls.primitive_length / cls.poincare_factor


def order_coefficient(kind: str, J: int, n: int) -> float:
    if kind == "conformal":
        return symcalc.conformal_coefficient(J, n)
    return symcalc.potential_coefficient(J)


def _check_alignment(table: InvariantTable, system: XRaySystem):
    if len(table.classes) != len(system.classes) or any(
        a.word != b.word for a, b in zip(table.classes, system.classes)
    ):
        raise PreconditionError("invariant table rows do not align with the X-ray system classes")


def forward_invariants(jet: SurfaceJet, system: XRaySystem, n: int, Jmax: int) -> InvariantTable:
    """Synthetic invariants of a jet difference on the classes of ``system``.

    Geodesic averages ``I(f)`` of a basis expansion are ``A @ coeffs`` where
    the rows of ``A`` are the X-ray transforms of the basis functions.

    For conformal jets order 0 gives ``exp(-i alpha_n l I(c_1))`` and order
    ``J`` gives ``alpha_n (-1/2)**J I(c_{J+1})``; for potentials order ``j``
    gives ``-(-1/2)**j I(d^{j-1} p)``.
    """
    if jet.basis is not system.basis:
        raise PreconditionError("jet and X-ray system use different bases")
    if Jmax < 0:
        raise PreconditionError("Jmax must be non-negative")
    A = system.matrix
    L = np.array([c.length for c in system.classes])
    values = {}
    if jet.kind == "conformal":
        alpha = symcalc.alpha(n)
        phases = np.exp(-1j * alpha * L * (A @ jet.row(1)))
        for J in range(1, Jmax + 1):
            values[J] = order_coefficient("conformal", J, n) * (A @ jet.row(J + 1))
    else:
        phases = None
        for j in range(1, Jmax + 1):
            values[j] = order_coefficient("potential", j, n) * (A @ jet.row(j - 1))
    return InvariantTable(system.classes, jet.kind, n, phases, values)


@dataclass(frozen=True)
class OrderEstimate:
    order: int
    row: int
    coefficients: np.ndarray
    residual: float

    @property
    def magnitude(self) -> float:
        return float(np.max(np.abs(self.coefficients))) if self.coefficients.size else 0.0


def _invert(system, data, ridge):
    x = xray_invert(system, data, ridge)
    norm = np.linalg.norm(data)
    resid = float(np.linalg.norm(system.matrix @ x - data) / norm) if norm > 0 else 0.0
    return x, resid


def recover_order_zero(table: InvariantTable, system: XRaySystem, n: int, ridge: float = 0.0,
                       margin: float = 1e-6) -> OrderEstimate:
    """Recover ``c_1`` from unit-modulus phases on the principal branch."""
    if table.kind != "conformal" or table.phases is None:
        raise PreconditionError("order-0 recovery needs a conformal table with phases")
    _check_alignment(table, system)
    alpha = symcalc.alpha(n)
    if alpha == 0:
        raise DimensionObstructionError("alpha_n vanishes for n = 2: the phases carry no information")
    arg = np.angle(table.phases)
    if np.any(np.abs(arg) >= math.pi * (1 - margin)):
        raise BranchViolationError(
            "phase arguments leave the principal branch; the linearized inversion is invalid"
        )
    data = -arg / (alpha * table.lengths)
    x, resid = _invert(system, data, ridge)
    return OrderEstimate(0, 1, x, resid)


def recover_higher_order(table: InvariantTable, J: int, system: XRaySystem, n: int, jet_so_far: SurfaceJet | None = None,
                         ridge: float = 0.0, tol: float = ZERO_TOL) -> OrderEstimate:
    """Recover the normal derivative carried by order ``J >= 1``.

    Returns ``c_{J+1}`` for conformal tables and ``d^{J-1}(q2 - q1)`` for
    potential tables.  ``jet_so_far`` must show all lower orders below
    ``tol``.
    """
    if J < 1:
        raise PreconditionError("higher-order recovery starts at J = 1")
    if J not in table.values:
        raise PreconditionError(f"table has no order {J}")
    _check_alignment(table, system)
    kind = table.kind
    if kind == "conformal" and symcalc.alpha(n) == 0:
        raise DimensionObstructionError("dimension obstruction: the conformal closed form vanishes for n = 2")
    row = J + 1 if kind == "conformal" else J - 1
    if jet_so_far is not None:
        lower = range(1, row) if kind == "conformal" else range(0, row)
        for m in lower:
            if np.max(np.abs(jet_so_far.row(m)), initial=0.0) > tol:
                raise PreconditionError(f"order {m} is not below tolerance; lower orders must vanish first")
    kappa = order_coefficient(kind, J, n)
    x, resid = _invert(system, table.values[J] / kappa, ridge)
    return OrderEstimate(J, row, x, resid)


@dataclass(frozen=True, eq=False)
class RecoveredJet:
    """Outcome of the pipeline: the recovered jet difference and diagnostics."""

    jet: SurfaceJet
    estimates: tuple
    verdict: str
    first_nonzero_order: int | None
    condition: float
    smallest_singular_value: float
    n: int

    @property
    def residuals(self) -> dict:
        return {e.order: e.residual for e in self.estimates}

    def boundary_jet(self, points) -> symcalc.BoundaryJet:
        return self.jet.to_boundary_jet(points)

    def to_json(self) -> dict:
        return {
            "schema": RECOVER_SCHEMA,
            "kind": self.jet.kind,
            "n": self.n,
            "verdict": self.verdict,
            "first_nonzero_order": self.first_nonzero_order,
            "conditioning": {"condition": self.condition, "smallest_singular_value": self.smallest_singular_value},
            "orders": [
                {
                    "order": e.order,
                    "derivative": e.row,
                    "residual": e.residual,
                    "max_abs_coefficient": e.magnitude,
                    "coefficients": e.coefficients.tolist(),
                }
                for e in self.estimates
            ],
        }

    def summary(self) -> str:
        lines = [f"kind={self.jet.kind} n={self.n} verdict={self.verdict}"]
        if self.first_nonzero_order is not None:
            lines.append(f"first non-zero order: {self.first_nonzero_order}")
        lines.append(f"condition number {self.condition:.3e}, smallest singular value {self.smallest_singular_value:.3e}")
        for e in self.estimates:
            lines.append(f"  order {e.order}: max|coeff| {e.magnitude:.3e}, residual {e.residual:.2e}")
        return "\n".join(lines)


def run_pipeline(jet_a: SurfaceJet, jet_b: SurfaceJet, system: XRaySystem, n: int, Jmax: int,
                 ridge: float = 0.0, tol: float = ZERO_TOL, table: InvariantTable | None = None) -> RecoveredJet:
    """Simulate the invariants of ``jet_b - jet_a`` and walk the orders upward.

    The verdict is ``"isospectral-consistent"`` when every order comes back
    below ``tol`` and ``"distinguished"`` otherwise.
    """
    if jet_a.kind != jet_b.kind:
        raise PreconditionError("jets must be of the same kind")
    diff = jet_b - jet_a
    if table is None:
        table = forward_invariants(diff, system, n, Jmax)
    kind = diff.kind
    rows = max(diff.order, (Jmax + 1) if kind == "conformal" else Jmax - 1) + 1
    coef = np.zeros((rows, len(system.basis)))
    estimates = []
    first = None
    orders = range(0, Jmax + 1) if kind == "conformal" else range(1, Jmax + 1)
    for J in orders:
        partial = SurfaceJet(kind, coef, diff.basis)
        if J == 0:
            est = recover_order_zero(table, system, n, ridge)
        else:
            est = recover_higher_order(table, J, system, n, partial, ridge, tol)
        estimates.append(est)
        coef[est.row] = est.coefficients
        if est.magnitude > tol:
            first = J
            break
    verdict = "isospectral-consistent" if first is None else "distinguished"
    return RecoveredJet(
        SurfaceJet(kind, coef, diff.basis), tuple(estimates), verdict, first,
        system.condition, system.smallest_singular_value, n,
    )


def field_error(basis, estimate, truth, points) -> float:
    """Relative L2 error of a recovered field over a point cloud."""
    pts = np.asarray(points, dtype=complex)
    B = basis.evaluate(pts)
    t = B @ np.asarray(truth, dtype=float)
    e = B @ np.asarray(estimate, dtype=float)
    nt = np.linalg.norm(t)
    return float(np.linalg.norm(e - t) / nt) if nt > 0 else float(np.linalg.norm(e))


def sample_points(group, count: int, seed: int = 0) -> np.ndarray:
    """Seeded points of the fundamental polygon, for measuring field errors."""
    rng = np.random.default_rng(seed)
    R = group.domain["circumradius"]
    out = []
    while len(out) < count:
        u = rng.random()
        rho = math.acosh(1 + u * (math.cosh(R) - 1))
        theta = 2 * math.pi * rng.random()
        r = math.tanh(rho / 2)
        w = r * complex(math.cos(theta), math.sin(theta))
        z = 1j * (1 + w) / (1 - w)
        if group.in_domain(z)[0]:
            out.append(z)
    return np.array(out)
