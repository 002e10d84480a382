"""QAM alphabets, Maxwell-Boltzmann probabilistic shaping, sampling, decisions.

Symbol-level only: no bit labeling, no FEC, no distribution matching. Every
spec produced here has unit mean power under its probabilities and four-fold
rotational symmetry (required by the pi/2-ambiguous blind phase search).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import bisect

from .errors import ConfigError

SUPPORTED_ORDERS = (4, 16, 64)
# minimum entropy reachable by Maxwell-Boltzmann shaping on a square grid:
# the four innermost points always share the lowest energy
MB_ENTROPY_FLOOR_BITS = 2.0


@dataclass(frozen=True)
class ConstellationSpec:
    """Symbol alphabet with per-symbol probabilities.

    points: complex amplitudes, unit mean power under probs
    probs: probabilities, sum 1
    entropy_bits: source entropy -sum(p log2 p)
    label: one of QPSK, QAM16, QAM64, PCS64, TPCS64
    """

    points: NDArray[np.complex128]
    probs: NDArray[np.float64]
    entropy_bits: float
    label: str

    def __post_init__(self):
        if abs(self.probs.sum() - 1.0) > 1e-12:
            raise ConfigError("constellation probabilities must sum to 1")
        if np.any(self.probs <= 0):
            raise ConfigError("constellation probabilities must be positive")
        power = float(np.sum(self.probs * np.abs(self.points) ** 2))
        if abs(power - 1.0) > 1e-12:
            raise ConfigError(f"constellation mean power {power!r} != 1")


def _integer_grid(order: int) -> NDArray[np.complex128]:
    """Square grid of odd-integer coordinates, row-major over (re, im)."""
    if order not in SUPPORTED_ORDERS:
        raise ConfigError(f"unsupported QAM order {order}; expected one of {SUPPORTED_ORDERS}")
    m = int(np.sqrt(order))
    levels = np.arange(-(m - 1), m, 2, dtype=float)
    re, im = np.meshgrid(levels, levels, indexing="ij")
    return (re + 1j * im).ravel()


def entropy(probs: NDArray[np.float64]) -> float:
    """Source entropy in bits/symbol, zero-probability entries ignored."""
    p = np.asarray(probs, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def mb_distribution(order: int, lam: float) -> NDArray[np.float64]:
    """Maxwell-Boltzmann probabilities p_i ~ exp(-lam |x_i|^2) on the
    unnormalized integer grid of the given square-QAM order."""
    if lam < 0:
        raise ConfigError("shaping rate lambda must be >= 0")
    energy = np.abs(_integer_grid(order)) ** 2
    # subtract the minimum so large lambda stays finite
    weights = np.exp(-lam * (energy - energy.min()))
    return weights / weights.sum()


def solve_mb_lambda(order: int, target_entropy: float) -> float:
    """Shaping rate lambda such that entropy(mb_distribution(order, lam))
    equals target_entropy to 1e-9 bits. Entropy is strictly decreasing in
    lambda, solved by bisection."""
    max_bits = np.log2(order)
    if not MB_ENTROPY_FLOOR_BITS < target_entropy <= max_bits:
        raise ConfigError(
            f"target entropy {target_entropy} outside attainable range "
            f"({MB_ENTROPY_FLOOR_BITS}, {max_bits}] for order {order}")
    if target_entropy == max_bits:
        return 0.0

    def residual(lam: float) -> float:
        return entropy(mb_distribution(order, lam)) - target_entropy

    hi = 1.0
    while residual(hi) > 0:
        hi *= 2.0
    lam = bisect(residual, 0.0, hi, xtol=1e-15, maxiter=500)
    if abs(residual(lam)) > 1e-9:
        raise ConfigError(f"shaping solver failed to converge for entropy {target_entropy}")
    return float(lam)


def _normalized_spec(points_raw: NDArray[np.complex128], probs: NDArray[np.float64],
                     label: str) -> ConstellationSpec:
    scale = np.sqrt(np.sum(probs * np.abs(points_raw) ** 2))
    points = points_raw / scale
    return ConstellationSpec(points=points, probs=probs,
                             entropy_bits=entropy(probs), label=label)


def build_qam(order: int) -> ConstellationSpec:
    """Uniform square QAM, unit mean power, entropy log2(order)."""
    label = {4: "QPSK", 16: "QAM16", 64: "QAM64"}.get(order)
    if label is None:
        raise ConfigError(f"unsupported QAM order {order}; expected one of {SUPPORTED_ORDERS}")
    points_raw = _integer_grid(order)
    probs = np.full(order, 1.0 / order)
    return _normalized_spec(points_raw, probs, label)


def build_shaped_qam(order: int, target_entropy: float, label: str) -> ConstellationSpec:
    """Maxwell-Boltzmann shaped square QAM at the requested source entropy."""
    lam = solve_mb_lambda(order, target_entropy)
    probs = mb_distribution(order, lam)
    return _normalized_spec(_integer_grid(order), probs, label)


def from_label(label: str, entropy_bits: float | None = None) -> ConstellationSpec:
    """Build a constellation by its configuration label. Shaped labels
    (PCS64, TPCS64) carry no default entropy; the caller must pass
    entropy_bits explicitly."""
    uniform = {"QPSK": 4, "QAM16": 16, "QAM64": 64}
    if label in uniform:
        return build_qam(uniform[label])
    if label in ("PCS64", "TPCS64"):
        if entropy_bits is None:
            raise ConfigError(f"{label} requires an explicit entropy_bits value")
        return build_shaped_qam(64, entropy_bits, label)
    raise ConfigError(f"unknown constellation label {label!r}")


def sample_symbols(spec: ConstellationSpec, count: int,
                   rng: np.random.Generator) -> NDArray[np.complex128]:
    """i.i.d. symbol draws from (points, probs)."""
    if count <= 0:
        raise ConfigError("sample count must be positive")
    idx = rng.choice(len(spec.points), size=count, p=spec.probs)
    return spec.points[idx]


def nearest_symbol(spec: ConstellationSpec, z):
    """Index of the closest constellation point (squared Euclidean
    distance); ties break to the lowest index. Scalar or array input."""
    z = np.asarray(z, dtype=complex)
    re = z.real[..., None] - spec.points.real
    im = z.imag[..., None] - spec.points.imag
    idx = np.argmin(re ** 2 + im ** 2, axis=-1)
    return int(idx) if idx.ndim == 0 else idx


def square_grid_params(points: NDArray[np.complex128]):
    """If the points form a full square grid aligned with the axes, return
    (levels ascending, spacing); otherwise None. Used by the fast BPS
    decision path; anything else falls back to exhaustive search.

    Levels are the exact stored coordinate values (no re-rounding): the
    quantizer must reproduce brute-force distances bitwise."""
    re = np.unique(points.real)
    im = np.unique(points.imag)
    if len(re) < 2 or len(re) != len(im) or len(re) ** 2 != len(points):
        return None
    if not np.allclose(re, im, atol=1e-12):
        return None
    steps = np.diff(re)
    if not np.allclose(steps, steps[0], rtol=1e-9):
        return None
    # all combinations must be present exactly once
    combos = {(r, i) for r, i in zip(points.real, points.imag)}
    if len(combos) != len(points):
        return None
    return re, float(steps[0])


def spec_to_json(spec: ConstellationSpec) -> str:
    """JSON form with points as [re, im] pairs, for golden-file tests."""
    doc = {
        "label": spec.label,
        "entropy_bits": spec.entropy_bits,
        "points": [[float(p.real), float(p.imag)] for p in spec.points],
        "probs": [float(q) for q in spec.probs],
    }
    return json.dumps(doc, indent=2)


def spec_from_json(blob: str) -> ConstellationSpec:
    doc = json.loads(blob)
    points = np.array([complex(r, i) for r, i in doc["points"]])
    return ConstellationSpec(points=points,
                             probs=np.array(doc["probs"], dtype=float),
                             entropy_bits=float(doc["entropy_bits"]),
                             label=doc["label"])
