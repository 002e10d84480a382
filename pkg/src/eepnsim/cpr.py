"""Carrier phase recovery stage.

Three estimators share one result type:

* ``lo_cancellation``: genie removal of the exact laser phase sum. Isolates
  the equalization-induced noise floor from tracking effects.
* ``idr_estimate``: data-aided remodulation, phi_hat = angle of the
  windowed sum of y * conj(x). Upper bound for decision-directed schemes.
* ``bps_estimate``: blind phase search over a quarter-plane test grid with
  min-distance decision metric and windowed accumulation.

Windowed sums use per-block prefix accumulators (restart every 4096
entries) so rounding error stays bounded at sweep-scale window lengths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .constellation import ConstellationSpec, square_grid_params
from .errors import ConfigError

_ALGORITHMS = ("LO_CANCEL", "IDR", "BPS")
_BLOCK = 4096


@dataclass(frozen=True)
class CprSpec:
    """Estimator selection plus window geometry. window = 2*half_window+1."""

    algorithm: str
    half_window: int = 0
    n_test_phases: int = 64

    def __post_init__(self):
        if self.algorithm not in _ALGORITHMS:
            raise ConfigError(f"unknown CPR algorithm {self.algorithm!r}")
        if self.half_window < 0:
            raise ConfigError("half_window must be >= 0")
        if self.n_test_phases < 2:
            raise ConfigError("n_test_phases must be >= 2")

    @property
    def window(self) -> int:
        return 2 * self.half_window + 1


@dataclass(frozen=True)
class CprResult:
    phi_hat: NDArray[np.float64]
    y_hat: NDArray[np.complex128]
    spec: CprSpec


def apply_cpr(y, phi_hat) -> NDArray[np.complex128]:
    """Derotate: y * exp(-j phi_hat). Shapes must match."""
    y = np.asarray(y, dtype=np.complex128)
    phi = np.asarray(phi_hat, dtype=np.float64)
    if y.shape != phi.shape:
        raise ConfigError(f"shape mismatch: y {y.shape} vs phi_hat {phi.shape}")
    return y * np.exp(-1j * phi)


def sliding_window_sum(values, half_window):
    """Moving sum over [k-l, k+l] clipped to the array, along axis 0.

    Accepts 1-D or 2-D input (2-D sums each column independently).
    Prefix accumulators restart every _BLOCK entries.
    """
    v = np.asarray(values)
    k = v.shape[0]
    l = int(half_window)
    if l < 0:
        raise ConfigError("half_window must be >= 0")
    if l == 0 or k == 0:
        return v.copy()
    if l >= k - 1:
        total = v.sum(axis=0)
        return np.broadcast_to(total, v.shape).copy()

    tail = v.shape[1:]
    pad = (-k) % _BLOCK
    if pad:
        vp = np.concatenate([v, np.zeros((pad,) + tail, dtype=v.dtype)], axis=0)
    else:
        vp = v
    nb = vp.shape[0] // _BLOCK
    local = np.cumsum(vp.reshape((nb, _BLOCK) + tail), axis=1)
    carry = np.zeros((nb,) + tail, dtype=v.dtype)
    carry[1:] = np.cumsum(local[:, -1], axis=0)[:-1]
    pincl = (local + carry[:, None]).reshape((nb * _BLOCK,) + tail)[:k]

    idx = np.arange(k)
    hi = np.minimum(idx + l, k - 1)
    lo = idx - l
    out = pincl[hi].copy()
    inside = lo > 0
    out[inside] -= pincl[lo[inside] - 1]
    return out


def lo_cancellation(record) -> CprResult:
    """Remove the known transmitter plus oscillator phase sample-by-sample."""
    spec = CprSpec(algorithm="LO_CANCEL")
    phi = record.phi_tx + record.phi_lo
    return CprResult(phi_hat=phi, y_hat=apply_cpr(record.y, phi), spec=spec)


def idr_estimate(record, spec: CprSpec) -> CprResult:
    """Data-aided estimate from the windowed correlation with the sent symbols."""
    if spec.algorithm != "IDR":
        raise ConfigError(f"idr_estimate got spec for {spec.algorithm}")
    corr = record.y * np.conj(record.x)
    phi = np.angle(sliding_window_sum(corr, spec.half_window))
    return CprResult(phi_hat=phi, y_hat=apply_cpr(record.y, phi), spec=spec)


def bps_test_phases(n_test_phases: int) -> NDArray[np.float64]:
    """Quarter-plane grid: -pi/4 + b * (pi/2) / n, b = 0..n-1."""
    n = int(n_test_phases)
    return -np.pi / 4 + np.arange(n) * (np.pi / 2) / n


def _min_squared_distance(z, spec: ConstellationSpec):
    """Elementwise squared distance from z to its nearest constellation point.

    Square grids quantize per axis; the retrieved level values are the
    stored coordinates, so the result matches an exhaustive scan bitwise.
    """
    re = z.real
    im = z.imag
    grid = square_grid_params(spec.points)
    if grid is not None:
        levels, delta = grid
        top = len(levels) - 1
        ire = np.clip(np.round((re - levels[0]) / delta), 0, top).astype(np.intp)
        iim = np.clip(np.round((im - levels[0]) / delta), 0, top).astype(np.intp)
        dr = re - levels[ire]
        di = im - levels[iim]
        return dr * dr + di * di
    d = np.full(z.shape, np.inf)
    for p in spec.points:
        dr = re - p.real
        di = im - p.imag
        np.minimum(d, dr * dr + di * di, out=d)
    return d


def bps_distance_matrix(y, spec: ConstellationSpec, n_test_phases: int):
    """(n_symbols, n_test_phases) decision metric, reusable across windows."""
    theta = bps_test_phases(n_test_phases)
    z = np.asarray(y, dtype=np.complex128)[:, None] * np.exp(-1j * theta)[None, :]
    return _min_squared_distance(z, spec)


def bps_phase_from_distances(d, n_test_phases: int, half_window: int):
    """Window-sum the metric, pick the test phase (ties to the lowest
    index), then unwrap so consecutive estimates never move more than a
    quarter of the pi/2 ambiguity step."""
    theta = bps_test_phases(n_test_phases)
    sums = sliding_window_sum(d, half_window)
    raw = theta[np.argmin(sums, axis=1)]
    return _unwrap_quarter(raw)


def _unwrap_quarter(raw):
    step = np.pi / 2
    m = np.zeros(len(raw))
    if len(raw) > 1:
        m[1:] = np.cumsum(np.round(-np.diff(raw) / step))
    return raw + step * m


def bps_estimate(y, constellation: ConstellationSpec, spec: CprSpec) -> CprResult:
    """Blind phase search; uses only y and the constellation geometry."""
    if spec.algorithm != "BPS":
        raise ConfigError(f"bps_estimate got spec for {spec.algorithm}")
    d = bps_distance_matrix(y, constellation, spec.n_test_phases)
    phi = bps_phase_from_distances(d, spec.n_test_phases, spec.half_window)
    return CprResult(phi_hat=phi, y_hat=apply_cpr(np.asarray(y), phi), spec=spec)


def genie_slip_removal(phi_hat, phi_reference):
    """Shift each estimate by the multiple of pi/2 that puts it within
    (-pi/4, pi/4] of the reference. Leaves slip-free input untouched."""
    phi = np.asarray(phi_hat, dtype=np.float64)
    ref = np.asarray(phi_reference, dtype=np.float64)
    if phi.shape != ref.shape:
        raise ConfigError("phi_hat and phi_reference lengths differ")
    m = np.ceil((phi - ref - np.pi / 4) / (np.pi / 2))
    return phi - (np.pi / 2) * m
