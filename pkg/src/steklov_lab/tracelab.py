"""Spectral traces: Weyl volume, mollified wave traces, singularity detection.

Also hosts the return-operator laboratory, which checks on a truncated
Fourier basis of the circle that ``W(t) = U(t) U_0(-t) - Id`` has the symbol
predicted by integrating the perturbation's symbol along the flow.

Conventions
-----------
The mollified trace of a spectrum is::

    S(t) = sum_k m_k rho(sigma_k) exp(-i sigma_k t),   rho(s) = exp(-s**2 / (2 B**2))

A unit singularity at ``T`` is the mollification of ``1/(t - T - i0)``,
whose spectral content is ``i dsigma`` on ``sigma > 0``; its window response
``kernel(tau) = i * int_0^inf rho(s) exp(-i s tau) ds`` has a closed form in
the Faddeeva function.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import signal as sps
from scipy.linalg import expm, toeplitz
from scipy.special import gamma, wofz

from ._util import parallel_map
from .errors import (
    AliasingError,
    OverlapError,
    PreconditionError,
    TruncationMismatchError,
)
from .modelgeo import SteklovSpectrum

PEAKS_SCHEMA = "peaks/v1"
CHUNK = 512


# -- Weyl law -----------------------------------------------------------------


def unit_ball_volume(d: int) -> float:
    """Volume of the unit ball in ``R^d``."""
    return math.pi ** (d / 2) / gamma(d / 2 + 1)


@dataclass(frozen=True)
class WeylFit:
    volume: float
    coefficient: float
    sigma_range: tuple
    residual: float


def weyl_fit(spec: SteklovSpectrum, n: int | None = None, min_count: int = 100, detail: bool = False):
    """Boundary volume from the growth of the counting function.

    The counting function is sampled at each distinct eigenvalue with the
    midpoint convention ``N(sigma) - m/2`` and fitted to ``C sigma**(n-1)``
    over the top half of the range.  The boundary volume is then
    ``C (2 pi)**(n-1) / vol(B^{n-1})``.
    """
    n = spec.n if n is None else n
    if n < 2:
        raise PreconditionError("dimension must be at least 2")
    if spec.total < min_count:
        raise PreconditionError(f"spectrum too short for a Weyl fit ({spec.total} < {min_count} eigenvalues)")
    sig = spec.sigma
    smax = sig[-1]
    sel = sig >= smax / 2
    if sel.sum() < 2:
        raise PreconditionError("not enough distinct eigenvalues in the top half of the range")
    counts = spec.counting(sig[sel]) - spec.multiplicity[sel] / 2.0
    x = sig[sel] ** (n - 1)
    C = float(np.dot(x, counts) / np.dot(x, x))
    resid = float(np.linalg.norm(C * x - counts) / np.linalg.norm(counts))
    vol = C * (2 * math.pi) ** (n - 1) / unit_ball_volume(n - 1)
    if detail:
        return WeylFit(vol, C, (float(smax / 2), float(smax)), resid)
    return vol


# -- trace signals ------------------------------------------------------------


def gaussian_window(sigma, bandwidth: float) -> np.ndarray:
    return np.exp(-0.5 * (np.asarray(sigma, dtype=float) / bandwidth) ** 2)


def unit_singularity(tau, bandwidth: float) -> np.ndarray:
    """Gaussian-window response to ``1/(t - T - i0)`` as a function of ``tau = t - T``."""
    x = np.asarray(tau, dtype=float) * bandwidth / math.sqrt(2.0)
    return 1j * bandwidth * math.sqrt(math.pi / 2) * np.conj(wofz(x))


def time_grid(t_min: float, t_max: float, step: float) -> np.ndarray:
    if not step > 0 or not t_max > t_min:
        raise PreconditionError("time grid needs t_max > t_min and step > 0")
    count = int(round((t_max - t_min) / step)) + 1
    return t_min + step * np.arange(count)


@dataclass(frozen=True)
class TraceSignal:
    """Complex signal on a uniform time grid."""

    t: np.ndarray
    values: np.ndarray
    window: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if t.shape != v.shape or t.ndim != 1:
            raise PreconditionError("time grid and values must be aligned 1-d arrays")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)

    @property
    def step(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else 0.0

    @property
    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    def __add__(self, other: "TraceSignal") -> "TraceSignal":
        if not np.array_equal(self.t, other.t):
            raise PreconditionError("signals live on different time grids")
        return TraceSignal(self.t, self.values + other.values, dict(self.window))

    def __neg__(self) -> "TraceSignal":
        return TraceSignal(self.t, -self.values, dict(self.window))

    def __sub__(self, other: "TraceSignal") -> "TraceSignal":
        return self + (-other)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "re", "im", "abs"])
        for t, v in zip(self.t, self.values):
            w.writerow([repr(float(t)), repr(float(v.real)), repr(float(v.imag)), repr(float(abs(v)))])
        return buf.getvalue()

    def to_svg(self, width: int = 640, height: int = 240, title: str = "|S(t)|") -> str:
        """Self-contained SVG polyline of ``|S(t)|``."""
        a = self.abs
        top = float(a.max()) if a.size and a.max() > 0 else 1.0
        t0, t1 = (float(self.t[0]), float(self.t[-1])) if self.t.size > 1 else (0.0, 1.0)
        pad = 30
        xs = pad + (self.t - t0) / (t1 - t0) * (width - 2 * pad)
        ys = height - pad - a / top * (height - 2 * pad)
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n'
            f'<rect width="100%" height="100%" fill="white"/>\n'
            f'<text x="{pad}" y="18" font-family="sans-serif" font-size="12">{title}  '
            f"t in [{t0:.3f}, {t1:.3f}], max {top:.4g}</text>\n"
            f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>\n'
            f'<polyline fill="none" stroke="steelblue" stroke-width="1" points="{pts}"/>\n'
            "</svg>\n"
        )


def _resolve_grid(grid, sigma_max: float) -> np.ndarray:
    if isinstance(grid, tuple) and len(grid) == 3:
        t = time_grid(*grid)
    else:
        t = np.asarray(grid, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise PreconditionError("time grid must have at least two points")
    steps = np.diff(t)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12) or steps[0] <= 0:
        raise PreconditionError("time grid must be uniform and increasing")
    if sigma_max > 0 and not steps[0] < math.pi / sigma_max:
        raise AliasingError(f"grid step {steps[0]:.4g} must be below pi/sigma_max = {math.pi / sigma_max:.4g}")
    return t


def _windowed_sum(sigma, weight, t) -> np.ndarray:
    """``sum_k weight_k exp(-i sigma_k t)``, chunks combined in ascending-sigma order."""
    order = np.argsort(sigma, kind="stable")
    sigma, weight = sigma[order], weight[order]
    bounds = [(i, min(i + CHUNK, sigma.size)) for i in range(0, sigma.size, CHUNK)]
    parts = parallel_map(lambda b: np.exp(-1j * np.outer(t, sigma[b[0]:b[1]])) @ weight[b[0]:b[1]], bounds)
    out = np.zeros(t.size, dtype=complex)
    for p in parts:
        out += p
    return out


def default_bandwidth(spec: SteklovSpectrum) -> float:
    return max(abs(spec.sigma_max), 1.0) / 20.0


def mollified_trace(spec: SteklovSpectrum, bandwidth: float | None = None, grid=None) -> TraceSignal:
    """Gaussian-mollified wave trace of ``spec`` on a uniform time grid.

    Parameters
    ----------
    spec : SteklovSpectrum
    bandwidth : float, optional
        Width ``B`` of the frequency window; defaults to ``sigma_max / 20``.
    grid : array_like or (t_min, t_max, step)
        Uniform time grid; its step must be below ``pi / sigma_max``.
    """
    if bandwidth is None:
        bandwidth = default_bandwidth(spec)
    if not bandwidth > 0:
        raise PreconditionError("bandwidth must be positive")
    smax = float(np.max(np.abs(spec.sigma))) if len(spec) else 0.0
    if grid is None:
        grid = (0.0, 14.0, min(0.01, 0.9 * math.pi / max(smax, 1.0)))
    t = _resolve_grid(grid, smax)
    if len(spec) == 0:
        return TraceSignal(t, np.zeros(t.size, dtype=complex), {"shape": "gaussian", "bandwidth": bandwidth})
    w = spec.multiplicity * gaussian_window(spec.sigma, bandwidth)
    vals = _windowed_sum(spec.sigma, w.astype(float), t)
    return TraceSignal(t, vals, {"shape": "gaussian", "bandwidth": float(bandwidth)})


def difference_trace(spec_a: SteklovSpectrum, spec_b: SteklovSpectrum, bandwidth: float | None = None, grid=None,
                     mismatch_rtol: float = 1e-2) -> TraceSignal:
    """Mollified ``Tr(U_A(t)) - Tr(U_B(t))`` for two spectra truncated at a common level."""
    sa, sb = spec_a.sigma_max, spec_b.sigma_max
    if len(spec_a) and len(spec_b) and abs(sa - sb) > mismatch_rtol * max(abs(sa), abs(sb), 1.0):
        raise TruncationMismatchError(f"spectra truncated at different levels ({sa:.6g} vs {sb:.6g})")
    if bandwidth is None:
        bandwidth = default_bandwidth(spec_a if sa >= sb else spec_b)
    smax = max(np.max(np.abs(spec_a.sigma), initial=0.0), np.max(np.abs(spec_b.sigma), initial=0.0))
    if grid is None:
        grid = (0.0, 14.0, min(0.01, 0.9 * math.pi / max(smax, 1.0)))
    t = _resolve_grid(grid, smax)
    sig = np.concatenate([spec_a.sigma, spec_b.sigma])
    w = np.concatenate([
        spec_a.multiplicity * gaussian_window(spec_a.sigma, bandwidth),
        -(spec_b.multiplicity * gaussian_window(spec_b.sigma, bandwidth)),
    ])
    vals = _windowed_sum(sig, w.astype(float), t) if sig.size else np.zeros(t.size, dtype=complex)
    return TraceSignal(t, vals, {"shape": "gaussian", "bandwidth": float(bandwidth)})


# -- singularity detection ----------------------------------------------------


@dataclass(frozen=True)
class PeakReport:
    times: np.ndarray
    amplitudes: np.ndarray
    widths: np.ndarray
    threshold: float

    def __len__(self):
        return self.times.size

    def strongest(self, count: int) -> np.ndarray:
        """Times of the ``count`` largest peaks, in decreasing amplitude."""
        order = np.argsort(-self.amplitudes, kind="stable")[:count]
        return self.times[order]

    def to_json(self) -> dict:
        return {
            "schema": PEAKS_SCHEMA,
            "threshold": float(self.threshold),
            "peaks": [
                {"t": float(t), "amplitude": float(a), "width": float(w)}
                for t, a, w in zip(self.times, self.amplitudes, self.widths)
            ],
        }


def find_peaks(sig: TraceSignal, factor: float = 5.0, threshold: float | None = None) -> PeakReport:
    """Local maxima of ``|S|`` above ``factor`` times its median, with half-prominence widths."""
    a = sig.abs
    if threshold is None:
        threshold = factor * float(np.median(a)) if a.size else 0.0
    if a.size < 3 or not np.any(a > threshold):
        empty = np.zeros(0)
        return PeakReport(empty, empty, empty, float(threshold))
    idx, _ = sps.find_peaks(a, height=max(threshold, np.finfo(float).tiny))
    widths = sps.peak_widths(a, idx, rel_height=0.5)[0] * sig.step if idx.size else np.zeros(0)
    return PeakReport(sig.t[idx], a[idx], np.asarray(widths, dtype=float), float(threshold))


def extract_invariants(sig: TraceSignal, lengths: Sequence[float], half_width: float | None = None) -> np.ndarray:
    """Complex singularity amplitudes of ``sig`` at each of ``lengths``.

    The signal is integrated over each window ``[T_i - h, T_i + h]`` and
    matched against the window integrals of the unit-singularity responses
    of all requested lengths at once, so the slowly decaying tails of the
    neighbours do not leak into an amplitude; a signal
    ``sum_j a_j * unit_singularity(t - T_j)`` returns the ``a_j`` exactly.

    Parameters
    ----------
    half_width : float, optional
        Integration half-width ``h``.  Keeping it fixed while changing the
        bandwidth makes the result bandwidth-stable.  Defaults to
        ``8 / bandwidth``.

    Raises
    ------
    OverlapError
        If two lengths are closer than three window widths ``2h``.
    """
    lengths = np.atleast_1d(np.asarray(lengths, dtype=float))
    bw = sig.window.get("bandwidth")
    if bw is None:
        raise PreconditionError("signal carries no window bandwidth")
    h = 8.0 / bw if half_width is None else float(half_width)
    if not h > 0:
        raise PreconditionError("half_width must be positive")
    if lengths.size > 1:
        gaps = np.diff(np.sort(lengths))
        if np.min(gaps) < 3 * 2 * h:
            raise OverlapError(
                f"lengths {np.min(gaps):.4g} apart cannot be separated by windows of width {2 * h:.4g}"
            )
    gram = np.zeros((lengths.size, lengths.size), dtype=complex)
    data = np.zeros(lengths.size, dtype=complex)
    for i, T in enumerate(lengths):
        sel = np.abs(sig.t - T) <= h
        if sel.sum() < 3:
            raise PreconditionError(f"length {T} is outside the signal's time grid")
        tt = sig.t[sel]
        if tt[0] > T - h + sig.step or tt[-1] < T + h - sig.step:
            raise PreconditionError(f"window around {T} is truncated by the grid")
        data[i] = np.trapezoid(sig.values[sel], tt)
        for j, Tj in enumerate(lengths):
            gram[i, j] = np.trapezoid(unit_singularity(tt - Tj, bw), tt)
    # diagonally dominant once the windows are separated
    return np.linalg.solve(gram, data)


# -- return-operator laboratory -----------------------------------------------


@dataclass(frozen=True)
class ReturnOperatorResult:
    """Empirical and predicted symbols of ``W(t)`` on a frequency window.

    ``empirical[j]`` and ``predicted[j]`` are the Fourier coefficients in
    ``x`` (offsets ``-N/2..N/2-1`` relative to the column frequency) of the
    symbol at frequency ``freqs[j]``.
    """

    freqs: np.ndarray
    offsets: np.ndarray
    empirical: np.ndarray
    predicted: np.ndarray
    deviations: np.ndarray
    column_norms: np.ndarray
    N: int
    t: float
    k_order: int

    @property
    def deviation(self) -> float:
        """Mean per-frequency relative L2 deviation over the window."""
        return float(np.mean(self.deviations)) if self.deviations.size else 0.0

    @property
    def decay_exponent(self) -> float:
        """Log-log slope of ``||W e_k||`` against ``|k|`` over the window."""
        k = np.abs(self.freqs).astype(float)
        y = self.column_norms
        if np.all(y == 0):
            return -np.inf
        return float(np.polyfit(np.log(k), np.log(y), 1)[0])

    def symbol_on_grid(self, x, which: str = "empirical") -> np.ndarray:
        """Symbol values ``w(x, k)`` for each window frequency (rows) at points ``x``."""
        coeffs = self.empirical if which == "empirical" else self.predicted
        phase = np.exp(1j * np.outer(self.offsets, np.asarray(x, dtype=float)))
        return coeffs @ phase


def _fourier_coefficients(b, N: int) -> np.ndarray:
    """Coefficients ``b_p``, ``p = -N/2 .. N/2-1``, of a periodic function or given array."""
    if callable(b):
        x = 2 * math.pi * np.arange(N) / N
        vals = np.asarray(b(x), dtype=complex) * np.ones(N)
        return np.fft.fftshift(np.fft.fft(vals) / N)
    arr = np.asarray(b, dtype=complex)
    if arr.shape != (N,):
        raise PreconditionError("explicit Fourier coefficients must have length N")
    return arr


def return_operator_lab(b, k_order: int = 1, N: int = 256, t: float = math.pi, window=None,
                        norm_budget: float = 20.0, n_cap: int = 1024) -> ReturnOperatorResult:
    """Compare ``W(t) = exp(it(A+B)) exp(-itA) - Id`` with its first-order symbol.

    ``A`` is the multiplier ``|k|`` on ``span{e^{ikx}: -N/2 <= k < N/2}`` and
    ``B`` is multiplication by ``b`` composed with ``|k|^{-k_order}`` (1 at
    ``k = 0``).  The empirical symbol of column ``k`` is
    ``sum_m W[m, k] e^{i(m-k)x}``; the prediction is
    ``i int_0^t b(x + s sign k) ds |k|^{-k_order}``.

    Parameters
    ----------
    b : callable or array
        Periodic function on ``[0, 2 pi)`` or its ``N`` shifted Fourier coefficients.
    window : (int, int), optional
        Frequencies ``lo <= |k| <= hi`` to compare; defaults to ``(N/8, N/4)``.
    norm_budget : float
        Upper bound on ``t * sup|b|`` for which the dense exponential is trusted.
    """
    N = int(N)
    if N < 64:
        raise PreconditionError("truncation N must be at least 64")
    if N > n_cap:
        raise PreconditionError(f"truncation N must not exceed {n_cap}")
    if N % 2:
        raise PreconditionError("truncation N must be even")
    if k_order < 1:
        raise PreconditionError("k_order must be a positive integer")
    lo, hi = window if window is not None else (N // 8, N // 4)
    if not 1 <= lo <= hi:
        raise PreconditionError("frequency window must satisfy 1 <= lo <= hi")
    k = np.arange(-N // 2, N // 2)
    bhat = _fourier_coefficients(b, N)
    # band of b: offsets carrying non-negligible coefficients
    sup_b = float(np.sum(np.abs(bhat)))
    support = np.nonzero(np.abs(bhat) > 1e-14 * max(sup_b, 1e-300))[0]
    band = int(np.max(np.abs(k[support]))) if support.size else 0
    if hi + band >= N // 2:
        raise PreconditionError(f"N = {N} too small for the window |k| <= {hi} with symbol band {band}")
    if abs(t) * sup_b > norm_budget:
        raise PreconditionError(f"t * ||B|| = {abs(t) * sup_b:.3g} exceeds the accuracy budget {norm_budget}")

    # multiplication by b in the k-basis: M[m, j] = bhat(k_m - k_j)
    def coef(p):
        idx = p + N // 2
        return np.where((idx >= 0) & (idx < N), bhat[np.clip(idx, 0, N - 1)], 0.0)

    M = toeplitz(coef(np.arange(N)), coef(-np.arange(N)))
    inv = np.abs(np.where(k == 0, 1, k)).astype(float) ** -float(k_order)
    B = M * inv[None, :]
    A = np.abs(k).astype(float)
    U = expm(1j * t * (np.diag(A) + B))
    W = U * np.exp(-1j * t * A)[None, :] - np.eye(N)

    cols = np.nonzero((np.abs(k) >= lo) & (np.abs(k) <= hi))[0]
    offsets = k.copy()
    emp = np.zeros((cols.size, N), dtype=complex)
    pred = np.zeros((cols.size, N), dtype=complex)
    devs = np.zeros(cols.size)
    norms = np.zeros(cols.size)
    for j, c in enumerate(cols):
        kk = k[c]
        sg = 1.0 if kk > 0 else -1.0
        rows = c + offsets
        ok = (rows >= 0) & (rows < N)
        emp[j, ok] = W[rows[ok], c]
        # int_0^t e^{i p s sg} ds
        p = offsets.astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            integ = np.where(p == 0, t, (np.exp(1j * p * t * sg) - 1.0) / (1j * p * sg))
        pred[j] = 1j * bhat * integ * abs(kk) ** -float(k_order)
        norms[j] = np.linalg.norm(emp[j])
        pn = np.linalg.norm(pred[j])
        devs[j] = np.linalg.norm(emp[j] - pred[j]) / pn if pn > 0 else (0.0 if norms[j] == 0 else np.inf)
    return ReturnOperatorResult(k[cols], offsets, emp, pred, devs, norms, N, float(t), int(k_order))
