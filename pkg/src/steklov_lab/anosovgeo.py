"""Closed geodesics and the geodesic X-ray transform on a compact hyperbolic surface.

The default surface is the genus-2 quotient of the upper half-plane by the
group generated by four hyperbolic translations whose axes pass through
``i`` at angles ``j pi/4``.  They pair opposite sides of a regular octagon
centered at ``i`` with interior angles ``pi/4``.

Points are complex numbers in the upper half-plane.  Unit-speed geodesics
are encoded by frames ``F`` in SL(2, R): the geodesic is
``s -> F (i e^s)`` and its velocity at ``s = 0`` is ``i / (c i + d)**2``.
"""
from __future__ import annotations

import csv
import functools
import io
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import mpmath
import numpy as np

from ._util import parallel_map
from .errors import FundamentalDomainError, PreconditionError, RankDeficiencyError

LETTERS = "abcdABCD"
RELATION = "aBcDAbCd"
XRAY_SCHEMA = "xray/v1"
WORD_BUDGET = 6
REDUCE_CAP = 256
_ORDER = {ch: i for i, ch in enumerate(LETTERS)}


def inverse_word(word: str) -> str:
    return word[::-1].swapcase()


def hyperbolic_distance(z, w) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    return 2.0 * np.arcsinh(np.abs(z - w) / (2.0 * np.sqrt(z.imag * w.imag)))


def _cosh_dist(z, w):
    return 1.0 + np.abs(z - w) ** 2 / (2.0 * z.imag * w.imag)


def mobius(M, z):
    return (M[0, 0] * z + M[0, 1]) / (M[1, 0] * z + M[1, 1])


def rotation(theta: float) -> np.ndarray:
    """Elliptic element rotating the hyperbolic plane about ``i`` by angle ``theta``."""
    h = theta / 2
    return np.array([[math.cos(h), -math.sin(h)], [math.sin(h), math.cos(h)]])


# -- group --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FuchsianGroup:
    """Cocompact Fuchsian group given by side pairings of a regular polygon.

    ``generators`` maps each letter to its matrix; uppercase letters are
    inverses.  ``domain`` describes the Dirichlet polygon centered at ``i``.
    """

    generators: dict
    relation: str
    domain: dict
    translation_length: float

    def __post_init__(self):
        for ch, M in self.generators.items():
            if abs(np.linalg.det(M) - 1.0) > 1e-12:
                raise PreconditionError(f"generator {ch} does not have determinant 1")
            if abs(np.trace(M)) <= 2.0:
                raise PreconditionError(f"generator {ch} is not hyperbolic")
        R = self.word_matrix(self.relation)
        if min(np.abs(R - np.eye(2)).max(), np.abs(R + np.eye(2)).max()) > 1e-10:
            raise PreconditionError("relation word does not evaluate to +-Id")
        stack = np.array([self.generators[ch] for ch in LETTERS])
        object.__setattr__(self, "_stack", stack)
        object.__setattr__(self, "_centers", np.array([mobius(M, 1j) for M in stack]))

    @property
    def letters(self) -> str:
        return LETTERS

    def word_matrix(self, word: str) -> np.ndarray:
        M = np.eye(2)
        for ch in word:
            M = M @ self.generators[ch]
        return M

    def word_matrix_mp(self, word: str, dps: int = 50):
        mats = self.domain["mp_generators"](dps)
        with mpmath.workdps(dps):
            M = mpmath.eye(2)
            for ch in word:
                M = M * mats[ch]
            return M

    def reduce_frame(self, F: np.ndarray, cap: int = REDUCE_CAP):
        """Greedily move ``F i`` toward ``i`` with generators until no generator helps.

        Returns
        -------
        (G, h) : the reduced frame ``h F`` and the group element ``h``.
        """
        h = np.eye(2)
        G = np.asarray(F, dtype=float)
        z = mobius(G, 1j)
        cur = _cosh_dist(z, 1j)
        for _ in range(cap):
            cand = (self._stack[:, 0, 0] * z + self._stack[:, 0, 1]) / (self._stack[:, 1, 0] * z + self._stack[:, 1, 1])
            cd = _cosh_dist(cand, 1j)
            k = int(np.argmin(cd))
            if not cd[k] < cur - 1e-13 * cur:
                return G, h
            g = self._stack[k]
            G = g @ G
            h = g @ h
            z, cur = cand[k], cd[k]
        raise FundamentalDomainError(f"fundamental-domain reduction did not terminate within {cap} steps")

    def reduce_point(self, z: complex, cap: int = REDUCE_CAP):
        """Point of the fundamental domain equivalent to ``z`` and the element used."""
        y = z.imag
        if y <= 0:
            raise PreconditionError("points must lie in the upper half-plane")
        F = np.array([[math.sqrt(y), z.real / math.sqrt(y)], [0.0, 1.0 / math.sqrt(y)]])
        G, h = self.reduce_frame(F, cap)
        return complex(mobius(G, 1j)), h

    def in_domain(self, z, atol: float = 1e-12) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        own = _cosh_dist(z, 1j)
        other = _cosh_dist(z[:, None], self._centers[None, :])
        return np.all(own[:, None] <= other + atol, axis=1)


def build_default_surface() -> FuchsianGroup:
    """Regular-octagon genus-2 surface.

    ``g_j = R(j pi/4) T R(-j pi/4)`` for ``j = 0..3``, where ``T`` translates
    along the imaginary axis by ``l`` with ``cosh(l/2) = 1 + sqrt 2`` and
    ``R`` rotates about ``i``.  Letters ``a, b, c, d`` name ``g_0..g_3``.
    """
    half = math.acosh(1.0 + math.sqrt(2.0))
    T = np.diag([math.exp(half), math.exp(-half)])
    gens = {}
    for j, ch in enumerate("abcd"):
        g = rotation(j * math.pi / 4) @ T @ rotation(-j * math.pi / 4)
        gens[ch] = g
        gens[ch.upper()] = np.array([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]])

    @functools.lru_cache(maxsize=4)
    def mp_generators(dps: int):
        with mpmath.workdps(dps):
            e = (1 + mpmath.sqrt(2)) + mpmath.sqrt((1 + mpmath.sqrt(2)) ** 2 - 1)
            Tm = mpmath.matrix([[e, 0], [0, 1 / e]])
            out = {}
            for j, ch in enumerate("abcd"):
                h = j * mpmath.pi / 8
                R = mpmath.matrix([[mpmath.cos(h), -mpmath.sin(h)], [mpmath.sin(h), mpmath.cos(h)]])
                Ri = mpmath.matrix([[mpmath.cos(h), mpmath.sin(h)], [-mpmath.sin(h), mpmath.cos(h)]])
                g = R * Tm * Ri
                out[ch] = g
                out[ch.upper()] = mpmath.matrix([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]])
            return out

    domain = {
        "center": 1j,
        "sides": 8,
        "inradius": half,
        "circumradius": math.acosh((1.0 + math.sqrt(2.0)) ** 2),
        "mp_generators": mp_generators,
    }
    return FuchsianGroup(gens, RELATION, domain, 2.0 * half)


# -- closed geodesics ---------------------------------------------------------


def _min_rotation(word: str) -> str:
    key = lambda w: [_ORDER[c] for c in w]
    return min((word[i:] + word[:i] for i in range(len(word))), key=key)


def _word_key(word: str):
    return [_ORDER[c] for c in word]


def canonical_word(word: str) -> str:
    """Least rotation of ``word`` or of its inverse (orientation merged)."""
    a, b = _min_rotation(word), _min_rotation(inverse_word(word))
    return a if _word_key(a) <= _word_key(b) else b


def primitive_root(word: str) -> tuple[str, int]:
    n = len(word)
    for p in range(1, n + 1):
        if n % p == 0 and word[:p] * (n // p) == word:
            return word[:p], n // p
    return word, 1


def is_cyclically_reduced(word: str) -> bool:
    if not word:
        return False
    return all(word[i] != word[(i + 1) % len(word)].swapcase() for i in range(len(word))) or len(word) == 1


def axis_frame(M: np.ndarray) -> tuple[np.ndarray, float]:
    """Frame ``F`` with ``M F (i e^s) = F (i e^{s + l})`` and the translation length ``l``."""
    tr = float(np.trace(M))
    if abs(tr) <= 2.0:
        raise PreconditionError("matrix is not hyperbolic")
    lam_abs = (abs(tr) + math.sqrt(tr * tr - 4.0)) / 2.0
    lam = math.copysign(lam_abs, tr)
    mu = 1.0 / lam
    a, b, c, d = M[0, 0], M[0, 1], M[1, 0], M[1, 1]

    def eigvec(ev):
        # (M - ev) v = 0; pick the better-conditioned row
        v1 = np.array([b, ev - a])
        v2 = np.array([ev - d, c])
        return v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2

    v, w = eigvec(lam), eigvec(mu)
    F = np.column_stack([v, w])
    det = np.linalg.det(F)
    if det < 0:
        F[:, 1] = -F[:, 1]
        det = -det
    F = F / math.sqrt(det)
    return F, 2.0 * math.log(lam_abs)


@dataclass(frozen=True, eq=False)
class ClosedGeodesicClass:
    """Free homotopy class of closed geodesics, orientation merged.

    Attributes
    ----------
    word : str
        Canonical cyclically reduced word.
    matrix : ndarray
        Representative matrix (any conjugate describes the same geodesic).
    length : float
        ``2 arccosh(|tr|/2)``.
    primitive_word, multiplicity :
        ``word = primitive_word ** multiplicity``.
    aliases : tuple of str
        Other canonical words found to describe the same closed geodesic.
    """

    word: str
    matrix: np.ndarray
    length: float
    primitive_word: str
    multiplicity: int
    group: FuchsianGroup = field(repr=False)
    merged_inverse: bool = True
    aliases: tuple = ()

    @property
    def primitive(self) -> bool:
        return self.multiplicity == 1

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))

    @property
    def primitive_length(self) -> float:
        return self.length / self.multiplicity

    @property
    def poincare_factor(self) -> float:
        """``|det(Id - P)|**(1/2) = 2 sinh(l/2)`` for curvature -1."""
        return 2.0 * math.sinh(self.length / 2.0)

    @property
    def morse_index(self) -> int:
        return 0

    def conjugated(self, g: np.ndarray) -> "ClosedGeodesicClass":
        """Same class with representative ``g M g^-1``."""
        gi = np.linalg.inv(g)
        return replace(self, matrix=g @ self.matrix @ gi)

    @classmethod
    def from_word(cls, group: FuchsianGroup, word: str) -> "ClosedGeodesicClass":
        if not is_cyclically_reduced(word):
            raise PreconditionError(f"word {word!r} is not cyclically reduced")
        canon = canonical_word(word)
        M = group.word_matrix(canon)
        tr = abs(float(np.trace(M)))
        if tr <= 2.0 + 1e-9:
            raise PreconditionError(f"word {word!r} is not hyperbolic (|tr| = {tr})")
        root, mult = primitive_root(canon)
        merged = _min_rotation(canon) != _min_rotation(inverse_word(canon))
        return cls(canon, M, 2.0 * math.acosh(tr / 2.0), root, mult, group, merged)


def _cyclic_words(max_len: int):
    inv = {ch: ch.swapcase() for ch in LETTERS}

    def extend(prefix):
        if prefix and (len(prefix) == 1 or prefix[-1] != inv[prefix[0]]):
            yield prefix
        if len(prefix) == max_len:
            return
        for ch in LETTERS:
            if prefix and ch == inv[prefix[-1]]:
                continue
            yield from extend(prefix + ch)

    yield from extend("")


def cutting_word(group: FuchsianGroup, M: np.ndarray, eps: float = 1e-9):
    """Side pairings crossed by the closed geodesic of ``M`` in one period.

    The geodesic is started in the fundamental polygon and followed exactly,
    side by side.  Returns the crossing word (a canonical name for the
    geometric curve) and whether the geodesic grazed a vertex, in which case
    the word depends on rounding.
    """
    F0, ell = axis_frame(M)
    G, _ = group.reduce_frame(F0)
    stack = group._stack
    s, word, vertex = 0.0, [], False
    for _ in range(10_000):
        Ginv = np.array([[G[1, 1], -G[0, 1]], [-G[1, 0], G[0, 0]]])
        p0 = mobius(Ginv, 1j)
        pk = (Ginv[0, 0] * group._centers + Ginv[0, 1]) / (Ginv[1, 0] * group._centers + Ginv[1, 1])
        # D_k(s) = A_k e^-s + B_k e^s, positive once the point is nearer g_k i
        A = abs(p0) ** 2 / p0.imag - np.abs(pk) ** 2 / pk.imag
        B = 1.0 / p0.imag - 1.0 / pk.imag
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = -A / B
            roots = np.where((ratio > 0) & (B > 0), 0.5 * np.log(ratio), np.inf)
        roots = np.where(roots > s + 1e-12, roots, np.inf)
        k = int(np.argmin(roots))
        sk = roots[k]
        if not np.isfinite(sk):
            # the geodesic runs along a side of the polygon
            return "".join(word), True
        if sk >= ell:
            break
        close = np.sort(roots)[:2]
        if close[1] - close[0] < eps:
            vertex = True
        word.append(LETTERS[k])
        # pull the exit point back across side k
        G = stack[(k + 4) % 8] @ G
        s = sk
    else:
        raise FundamentalDomainError("too many side crossings")
    return "".join(word), vertex


def _geometric_key(group, M):
    w, vertex = cutting_word(group, M)
    if vertex or not w:
        return None
    return canonical_word(w)


def enumerate_classes(group: FuchsianGroup, max_word_length: int, budget: int = WORD_BUDGET,
                      merge_geometric: bool = True) -> list[ClosedGeodesicClass]:
    """Closed geodesic classes from cyclically reduced words of length ``<= W``.

    Words are taken up to cyclic rotation and inversion.  With
    ``merge_geometric`` distinct words describing the same closed curve (e.g.
    the two halves of the relator) are merged; the duplicates are kept in
    :attr:`ClosedGeodesicClass.aliases`.  Classes are sorted by length, then
    word.
    """
    W = int(max_word_length)
    if W < 1:
        raise PreconditionError("maximum word length must be at least 1")
    if W > budget:
        raise PreconditionError(f"word length {W} exceeds the enumeration budget {budget}")
    canon = []
    for w in _cyclic_words(W):
        if canonical_word(w) == w:
            canon.append(w)
    classes = []
    for w in canon:
        M = group.word_matrix(w)
        if abs(np.trace(M)) <= 2.0 + 1e-9:
            continue
        classes.append(ClosedGeodesicClass.from_word(group, w))
    classes.sort(key=lambda c: (round(c.length, 9), len(c.word), _word_key(c.word)))
    if not merge_geometric:
        return classes
    keys = parallel_map(lambda c: _geometric_key(group, c.matrix), classes)
    seen: dict[str, int] = {}
    degenerate: list[int] = []
    conjugators = None
    out: list[ClosedGeodesicClass] = []
    aliases: list[list[str]] = []
    for c, key in zip(classes, keys):
        same = lambda j: abs(out[j].length - c.length) < 1e-8 * max(1.0, c.length)
        if key is not None and key in seen and same(seen[key]):
            aliases[seen[key]].append(c.word)
            continue
        if key is None:
            # geodesics along polygon sides: fall back to an explicit conjugacy search
            if conjugators is None:
                conjugators = _ball(group, 3)
            match = next((j for j in degenerate if same(j) and _conjugate(out[j].matrix, c.matrix, conjugators)), None)
            if match is not None:
                aliases[match].append(c.word)
                continue
            degenerate.append(len(out))
        else:
            seen[key] = len(out)
        out.append(c)
        aliases.append([])
    return [replace(c, aliases=tuple(a)) if a else c for c, a in zip(out, aliases)]


def _ball(group: FuchsianGroup, radius: int) -> np.ndarray:
    mats = [np.eye(2)]
    frontier = [("", np.eye(2))]
    for _ in range(radius):
        nxt = []
        for w, M in frontier:
            for ch in LETTERS:
                if w and ch == w[-1].swapcase():
                    continue
                N = M @ group.generators[ch]
                nxt.append((w + ch, N))
                mats.append(N)
        frontier = nxt
    return np.array(mats)


def _conjugate(M1: np.ndarray, M2: np.ndarray, conjugators: np.ndarray, atol: float = 1e-8) -> bool:
    """Whether ``g M1 g^-1`` equals ``+-M2`` or ``+-M2^-1`` for some listed ``g``."""
    inv = np.linalg.inv(conjugators)
    conj = conjugators @ M1 @ inv
    M2i = np.linalg.inv(M2)
    scale = atol * max(1.0, np.abs(M2).max())
    for T in (M2, -M2, M2i, -M2i):
        if np.any(np.abs(conj - T).max(axis=(1, 2)) < scale):
            return True
    return False


def classes_to_csv(classes: Sequence[ClosedGeodesicClass]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["word", "length", "primitive", "multiplicity", "poincare_factor"])
    for c in classes:
        w.writerow([c.word, repr(c.length), str(c.primitive).lower(), c.multiplicity, repr(c.poincare_factor)])
    return buf.getvalue()


@dataclass(frozen=True)
class Collision:
    word_a: str
    word_b: str
    difference: float

    @property
    def exact(self) -> bool:
        """Lengths agree to 40 digits, i.e. are equal (symmetry images)."""
        return self.difference < 1e-40


def exact_length(group: FuchsianGroup, word: str, dps: int = 50):
    with mpmath.workdps(dps):
        M = group.word_matrix_mp(word, dps)
        tr = abs(M[0, 0] + M[1, 1])
        return 2 * mpmath.acosh(tr / 2)


def length_spectrum_report(classes: Sequence[ClosedGeodesicClass], tol: float, dps: int = 50) -> list[Collision]:
    """Pairs of classes whose lengths differ by less than ``tol`` (50-digit arithmetic)."""
    if not classes:
        raise PreconditionError("no classes given")
    group = classes[0].group
    with mpmath.workdps(dps):
        lengths = [exact_length(group, c.word, dps) for c in classes]
        order = sorted(range(len(classes)), key=lambda i: lengths[i])
        out = []
        for a in range(len(order)):
            i = order[a]
            for b in range(a + 1, len(order)):
                j = order[b]
                diff = lengths[j] - lengths[i]
                if diff >= tol:
                    break
                out.append(Collision(classes[i].word, classes[j].word, float(abs(diff))))
    return out


# -- sampling along closed geodesics ------------------------------------------


def default_samples(cls: ClosedGeodesicClass) -> int:
    return max(64, int(math.ceil(16 * cls.length)))


@functools.lru_cache(maxsize=8192)
def _samples_cached(cls: ClosedGeodesicClass, count: int, matrix_key: bytes):
    group = cls.group
    F0, ell = axis_frame(cls.matrix)
    s = ell * np.arange(count) / count
    z = np.empty(count, dtype=complex)
    zdot = np.empty(count, dtype=complex)
    h = np.eye(2)
    for j, sj in enumerate(s):
        D = np.diag([math.exp(sj / 2), math.exp(-sj / 2)])
        G, step = group.reduce_frame(h @ F0 @ D)
        h = step @ h
        z[j] = mobius(G, 1j)
        zdot[j] = 1j / (G[1, 0] * 1j + G[1, 1]) ** 2
    z.setflags(write=False)
    zdot.setflags(write=False)
    return z, zdot


def geodesic_samples(cls: ClosedGeodesicClass, count: int):
    """Equally spaced arclength samples of the closed geodesic, reduced to the domain.

    Returns
    -------
    z, zdot : complex arrays
        Reduced points and the unit velocity there.
    """
    if count < 64:
        raise PreconditionError("at least 64 samples are required")
    return _samples_cached(cls, int(count), cls.matrix.tobytes())


def _evaluate(f, z, zdot=None):
    if hasattr(f, "evaluate"):
        return np.asarray(f.evaluate(z), dtype=float)
    if callable(f):
        return np.asarray(f(z), dtype=float) * np.ones(z.shape)
    return np.full(z.shape, float(f))


def _average(f, cls, samples, tol, max_samples, weight=None):
    n = default_samples(cls) if samples is None else int(samples)
    if n < 64:
        raise PreconditionError("at least 64 samples are required")
    prev = None
    while True:
        z, zd = geodesic_samples(cls, n)
        vals = _evaluate(f, z)
        if weight is not None:
            vals = vals * weight(z, zd)
        cur = vals.mean(axis=0)
        if prev is not None and np.max(np.abs(cur - prev)) <= tol * max(1.0, np.max(np.abs(cur))):
            return cur
        if n * 2 > max_samples:
            if prev is None:
                return cur
            raise FundamentalDomainError(f"X-ray quadrature not converged at {n} samples")
        prev = cur
        n *= 2


def xray_function(f, cls: ClosedGeodesicClass, samples: int | None = None, tol: float = 1e-10,
                  max_samples: int = 16384):
    """Length-normalized integral of ``f`` over the closed geodesic of ``cls``.

    Uses the trapezoid rule on equally spaced arclength samples (exact for
    trigonometric integrands, spectrally accurate for smooth ones) and doubles
    the sample count until two successive values agree to ``tol``.
    ``f`` may be a constant, a callable of complex points, or an object with
    an ``evaluate`` method returning one column per basis function.
    """
    out = _average(f, cls, samples, tol, max_samples)
    return float(out) if np.ndim(out) == 0 else out


def xray_conformal_tensor(f, cls: ClosedGeodesicClass, samples: int | None = None, tol: float = 1e-10,
                          max_samples: int = 16384):
    """Average of the quadratic form ``f h`` on the geodesic's velocity.

    ``h = |dz|**2 / y**2`` is the hyperbolic metric; the velocity comes from
    the reduced frame, so the identity with :func:`xray_function` is checked
    rather than assumed.
    """
    def weight(z, zd):
        m = np.abs(zd) ** 2 / z.imag**2
        return m[:, None] if hasattr(f, "evaluate") else m

    out = _average(f, cls, samples, tol, max_samples, weight=weight)
    return float(out) if np.ndim(out) == 0 else out


# -- bump basis ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BumpBasis:
    """Gaussian bumps in hyperbolic distance, periodized over the group.

    Bump ``j`` is ``sum_g exp(-d(z, g c_j)**2 / (2 w**2))`` over the group
    translates of ``c_j`` within ``circumradius + cutoff`` of ``i``.
    """

    group: FuchsianGroup
    centers: np.ndarray
    width: float
    cutoff: float
    translates: tuple = field(repr=False, default=())

    @classmethod
    def create(cls, group: FuchsianGroup, centers, width: float = 0.45, cutoff: float | None = None):
        centers = np.atleast_1d(np.asarray(centers, dtype=complex))
        if np.any(centers.imag <= 0):
            raise PreconditionError("bump centers must lie in the upper half-plane")
        if not width > 0:
            raise PreconditionError("bump width must be positive")
        if cutoff is None:
            cutoff = width * math.sqrt(2 * 32.0)
        reach = group.domain["circumradius"] + cutoff
        trans = tuple(_translates(group, c, reach) for c in centers)
        return cls(group, centers, float(width), float(cutoff), trans)

    @classmethod
    def random(cls, group: FuchsianGroup, count: int, seed: int = 0, width: float = 0.45,
               min_separation: float = 0.4, max_radius: float | None = None):
        """``count`` seeded centers uniform in a hyperbolic disk about ``i`` inside the polygon."""
        rng = np.random.default_rng(seed)
        R = group.domain["inradius"] * 0.95 if max_radius is None else max_radius
        pts: list[complex] = []
        for _ in range(200 * max(count, 1)):
            if len(pts) == count:
                break
            # area-uniform radius in the hyperbolic disk
            u = rng.random()
            rho = math.acosh(1 + u * (math.cosh(R) - 1))
            theta = 2 * math.pi * rng.random()
            r = math.tanh(rho / 2)
            wdisk = r * complex(math.cos(theta), math.sin(theta))
            z = 1j * (1 + wdisk) / (1 - wdisk)
            if all(hyperbolic_distance(z, p) >= min_separation for p in pts):
                pts.append(z)
        if len(pts) < count:
            raise PreconditionError(f"could not place {count} bumps with separation {min_separation}")
        return cls.create(group, np.array(pts), width)

    def __len__(self):
        return self.centers.size

    def evaluate(self, z, coeffs=None) -> np.ndarray:
        """Basis values at points ``z`` (shape ``z.shape + (nbasis,)``), or the combination."""
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        out = np.zeros((flat.size, len(self)))
        for j, pts in enumerate(self.translates):
            d = 2.0 * np.arcsinh(np.abs(flat[:, None] - pts[None, :]) / (2.0 * np.sqrt(flat.imag[:, None] * pts.imag[None, :])))
            out[:, j] = np.exp(-(d**2) / (2 * self.width**2)).sum(axis=1)
        out = out.reshape(z.shape + (len(self),))
        return out if coeffs is None else out @ np.asarray(coeffs, dtype=float)

    def function(self, coeffs) -> Callable:
        coeffs = np.asarray(coeffs, dtype=float)
        return lambda z: self.evaluate(z, coeffs)

    def derivative_along(self, z, zdot, coeffs) -> np.ndarray:
        """Derivative of the combination along the unit-speed flow with velocity ``zdot``."""
        z = np.asarray(z, dtype=complex).ravel()
        zdot = np.asarray(zdot, dtype=complex).ravel()
        coeffs = np.asarray(coeffs, dtype=float)
        out = np.zeros(z.size)
        y, ydot = z.imag[:, None], zdot.imag[:, None]
        for cj, pts in zip(coeffs, self.translates):
            if cj == 0:
                continue
            diff = z[:, None] - pts[None, :]
            py = pts.imag[None, :]
            u = 1.0 + np.abs(diff) ** 2 / (2 * y * py)
            du = np.real(diff * np.conj(zdot[:, None])) / (y * py) - np.abs(diff) ** 2 * ydot / (2 * y**2 * py)
            d = np.arccosh(np.maximum(u, 1.0))
            ratio = np.where(d > 1e-8, d / np.sinh(np.where(d > 1e-8, d, 1.0)), 1.0)
            out += cj * np.sum(-np.exp(-(d**2) / (2 * self.width**2)) * ratio * du / self.width**2, axis=1)
        return out

    def descriptor(self) -> dict:
        return {
            "kind": "gaussian-bumps",
            "centers": [[float(c.real), float(c.imag)] for c in self.centers],
            "width": self.width,
            "cutoff": self.cutoff,
        }


def _translates(group: FuchsianGroup, c: complex, reach: float) -> np.ndarray:
    """Orbit points ``g c`` within ``reach`` of ``i``, by breadth-first search over words."""
    slack = group.translation_length
    seen = {}
    queue = deque([np.eye(2)])
    pts = []

    def key(z):
        return (round(z.real, 9), round(z.imag, 9))

    z0 = complex(c)
    seen[key(z0)] = True
    pts.append(z0)
    while queue:
        g = queue.popleft()
        for ch in LETTERS:
            h = g @ group.generators[ch]
            z = complex(mobius(h, c))
            k = key(z)
            if k in seen:
                continue
            d = float(hyperbolic_distance(z, 1j))
            if d > reach + slack:
                continue
            seen[k] = True
            queue.append(h)
            if d <= reach:
                pts.append(z)
    # rounding keys can split one orbit point; orbit points are far apart, so merge by distance
    pts = np.array(pts)
    dist = hyperbolic_distance(pts[:, None], pts[None, :])
    keep = [i for i in range(len(pts)) if not np.any(dist[i, :i] < 1e-6)]
    return pts[keep]


# -- X-ray systems ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class XRaySystem:
    basis: object
    classes: tuple
    matrix: np.ndarray
    singular_values: np.ndarray

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def rank(self) -> int:
        s = self.singular_values
        if s.size == 0 or s[0] == 0:
            return 0
        return int(np.sum(s > max(self.matrix.shape) * np.finfo(float).eps * s[0]))

    @property
    def rank_deficient(self) -> bool:
        return self.rank < self.matrix.shape[1]

    @property
    def smallest_singular_value(self) -> float:
        return float(self.singular_values[-1])

    @property
    def condition(self) -> float:
        s = self.singular_values
        return float(s[0] / s[-1]) if s[-1] > 0 else math.inf

    def to_json(self) -> dict:
        basis = self.basis.descriptor() if hasattr(self.basis, "descriptor") else {"kind": str(self.basis)}
        return {
            "schema": XRAY_SCHEMA,
            "basis": basis,
            "classes": [c.word for c in self.classes],
            "shape": list(self.matrix.shape),
            "matrix": self.matrix.tolist(),
            "singular_values": self.singular_values.tolist(),
            "rank": self.rank,
            "condition": self.condition,
        }


class ConstantBasis:
    """The one-element basis ``{1}``."""

    def __len__(self):
        return 1

    def evaluate(self, z, coeffs=None):
        z = np.asarray(z)
        out = np.ones(z.shape + (1,))
        return out if coeffs is None else out @ np.asarray(coeffs, dtype=float)

    def descriptor(self):
        return {"kind": "constant"}


def design_matrix(basis, classes, samples=None, tol: float = 1e-10) -> np.ndarray:
    rows = parallel_map(lambda c: np.atleast_1d(xray_function(basis, c, samples=samples, tol=tol)), classes)
    return np.vstack(rows) if rows else np.zeros((0, len(basis)))


def build_xray_system(basis, classes: Sequence[ClosedGeodesicClass], samples=None, tol: float = 1e-10) -> XRaySystem:
    """Design matrix of geodesic averages of each basis function, with its singular values."""
    classes = tuple(classes)
    if len(classes) < len(basis):
        raise PreconditionError(f"under-determined: {len(classes)} classes for {len(basis)} basis functions")
    A = design_matrix(basis, classes, samples, tol)
    if not np.all(np.isfinite(A)):
        raise FundamentalDomainError("non-finite X-ray values")
    sv = np.linalg.svd(A, compute_uv=False)
    return XRaySystem(basis, classes, A, sv)


def xray_invert(system: XRaySystem, values, ridge: float = 0.0) -> np.ndarray:
    """Minimizer of ``||A x - v||**2 + ridge ||x||**2`` through the SVD of ``A``."""
    v = np.asarray(values, dtype=float).ravel()
    A = system.matrix
    if v.size != A.shape[0]:
        raise PreconditionError(f"{v.size} values for {A.shape[0]} classes")
    if ridge < 0:
        raise PreconditionError("ridge parameter must be non-negative")
    if ridge == 0 and system.rank_deficient:
        raise RankDeficiencyError(
            f"design matrix has rank {system.rank} < {A.shape[1]}; use a positive ridge parameter"
        )
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    filt = 1.0 / s if ridge == 0 else s / (s * s + ridge)
    return Vt.T @ (filt * (U.T @ v))


def discrepancy_ridge(system: XRaySystem, values, noise_norm: float, tau: float = 1.0,
                      bounds=(1e-16, 1e4)) -> float:
    """Ridge parameter whose residual norm equals ``tau * noise_norm`` (bisection in log scale)."""
    v = np.asarray(values, dtype=float).ravel()
    target = tau * noise_norm
    resid = lambda lam: float(np.linalg.norm(system.matrix @ xray_invert(system, v, lam) - v))
    lo, hi = math.log(bounds[0]), math.log(bounds[1])
    if resid(math.exp(lo)) >= target:
        return math.exp(lo)
    if resid(math.exp(hi)) <= target:
        return math.exp(hi)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if resid(math.exp(mid)) < target:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))
