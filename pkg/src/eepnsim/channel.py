"""Baseband coherent link chain with aligned ground truth.

One realization runs a single oversampled circular block through: symbol
upsampling, root-raised-cosine pulse shaping, TX laser rotation, fiber
chromatic dispersion (all-pass quadratic phase), additive ASE at the receiver
input, LO laser rotation, then the receive filter (matched RRC plus exact
dispersion compensation), symbol-spaced sampling and edge trimming.

Filter normalization is chosen so the chain is exactly transparent and
exactly calibrated: with the TX and RX filters both sqrt(os/T_s) * G(f)
(G the RRC amplitude with G(0) = sqrt(T_s)), the cascade per alias group sums
to 1 by the raised-cosine Nyquist identity. Consequences used all over the
tests: a noiseless undispersed chain returns sqrt(P) x_k to machine
precision, and white noise injected with per-sample variance sigma^2 leaves
the matched filter with per-symbol variance sigma^2 again, so no empirical
calibration factors exist anywhere.

The noise ground-truth sequence n_k is the ASE-only waveform propagated
through the same LO rotation and receive filter with the same draws, which
makes the record's linearity decomposition y = y_signal + n exact and lets
one prepared record serve every OSNR point (the chain is linear in the noise
waveform after injection).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray
from scipy.constants import c as C_M_S

from .constellation import ConstellationSpec, sample_symbols
from .errors import ConfigError
from .stochastic import complex_gaussian, wiener_path

# OSNR reference bandwidth, 0.1 nm convention
B_REF_HZ = 12.5e9


@dataclass(frozen=True)
class LinkConfig:
    """Physical and numerical parameters of one simulated link.

    Units: D in ps/nm/km, L in km, f0 in THz, baud and linewidths in Hz,
    OSNR in dB/0.1nm (np.inf disables ASE). p_scale is the received signal
    power scale P (dimensionless, default 1)."""

    d_ps_nm_km: float = 20.6
    l_km: float = 6600.0
    f0_thz: float = 194.0
    baud_hz: float = 49e9
    rolloff: float = 0.01
    lw_tx_hz: float = 0.0
    lw_lo_hz: float = 200e3
    osnr_db: float = 20.0
    n_symbols: int = 2 ** 17
    n_realizations: int = 10
    n_discard: int = 15000
    oversampling: int = 2
    p_scale: float = 1.0

    def __post_init__(self):
        if self.oversampling < 2:
            raise ConfigError("oversampling must be >= 2 to hold the RRC band")
        if self.n_symbols <= 2 * self.n_discard:
            raise ConfigError(
                f"n_symbols={self.n_symbols} must exceed 2*n_discard={2 * self.n_discard}")
        if not 0.0 <= self.rolloff <= 1.0:
            raise ConfigError(f"rolloff must be in [0, 1], got {self.rolloff}")
        if self.baud_hz <= 0 or self.f0_thz <= 0:
            raise ConfigError("baud_hz and f0_thz must be positive")
        if self.lw_tx_hz < 0 or self.lw_lo_hz < 0:
            raise ConfigError("linewidths must be >= 0")
        if self.n_realizations < 1 or self.n_discard < 0:
            raise ConfigError("n_realizations >= 1 and n_discard >= 0 required")
        if self.p_scale <= 0:
            raise ConfigError("p_scale must be positive")
        if np.isnan(self.osnr_db):
            raise ConfigError("osnr_db must be a number or inf")
        if self.l_km < 0:
            raise ConfigError("l_km must be >= 0")


@dataclass(frozen=True)
class PreparedRecord:
    """One realization with unit-variance noise kept separate, so any OSNR
    point can be produced by scaling (record_at_osnr)."""

    x: NDArray[np.complex128]
    phi_tx: NDArray[np.float64]
    phi_lo: NDArray[np.float64]
    y_signal: NDArray[np.complex128]
    n_unit: NDArray[np.complex128]
    config: LinkConfig


@dataclass(frozen=True)
class ReceptionRecord:
    """Aligned per-symbol ground truth of one realization, trimmed to
    n_symbols - 2*n_discard: transmitted symbols, laser phases at symbol
    instants, the filtered ASE contribution, and the CPR input y."""

    x: NDArray[np.complex128]
    phi_tx: NDArray[np.float64]
    phi_lo: NDArray[np.float64]
    n: NDArray[np.complex128]
    y: NDArray[np.complex128]
    config: LinkConfig

    def __post_init__(self):
        lengths = {len(self.x), len(self.phi_tx), len(self.phi_lo),
                   len(self.n), len(self.y)}
        if len(lengths) != 1:
            raise ConfigError("record sequences must have equal length")


def rrc_amplitude(f, baud_hz: float, rolloff: float):
    """Root-raised-cosine amplitude response with H(0) = sqrt(T_s); the
    cascade H*H forms a Nyquist raised cosine."""
    ts = 1.0 / baud_hz
    af = np.abs(np.asarray(f, dtype=float))
    half = baud_hz / 2.0
    if rolloff == 0.0:
        cos2 = np.where(af < half, 1.0, np.where(af == half, 0.5, 0.0))
    else:
        lo = (1.0 - rolloff) * half
        hi = (1.0 + rolloff) * half
        cos2 = np.zeros(af.shape)
        cos2[af <= lo] = 1.0
        band = (af > lo) & (af < hi)
        cos2[band] = 0.5 * (1.0 + np.cos(np.pi / (rolloff * baud_hz) * (af[band] - lo)))
    amp = np.sqrt(ts * cos2)
    return float(amp) if np.isscalar(f) else amp


def cd_phase(f, d_ps_nm_km: float, l_km: float, f0_thz: float):
    """Chromatic dispersion phase pi c D L f^2 / f0^2 in radians.
    Engineering units converted internally (D: ps/nm/km -> s/m^2, L: km -> m,
    f0: THz -> Hz)."""
    d_si = d_ps_nm_km * 1e-6
    l_m = l_km * 1e3
    f0_hz = f0_thz * 1e12
    phase = np.pi * C_M_S * d_si * l_m * np.square(np.asarray(f, dtype=float)) / f0_hz ** 2
    return float(phase) if np.isscalar(f) else phase


def apply_transfer(signal, transfer):
    """Circular convolution through the DFT: IDFT(DFT(signal) * transfer)."""
    signal = np.asarray(signal)
    transfer = np.asarray(transfer)
    if signal.shape != transfer.shape:
        raise ConfigError(
            f"signal/transfer length mismatch: {signal.shape} vs {transfer.shape}")
    return np.fft.ifft(np.fft.fft(signal) * transfer)


def ase_variance(osnr_db: float, baud_hz: float, oversampling: int,
                 p: float = 1.0) -> float:
    """Per-sample complex ASE variance for a target OSNR (dB in the 12.5 GHz
    reference bandwidth, single polarization).

    The receive-filter normalization maps per-sample variance one-to-one onto
    post-matched-filter symbol variance (see module docstring), so the value
    is independent of the oversampling factor; the argument stays for
    interface clarity. Symbol SNR then equals OSNR_lin * B_ref / baud."""
    if np.isinf(osnr_db):
        return 0.0
    osnr_lin = 10.0 ** (osnr_db / 10.0)
    return p * baud_hz / (osnr_lin * B_REF_HZ)


def cd_memory_symbols(config: LinkConfig) -> float:
    """One-sided dispersion equalizer memory in symbols,
    c D L B^2 / (2 f0^2). Edge discards must exceed this."""
    d_si = config.d_ps_nm_km * 1e-6
    l_m = config.l_km * 1e3
    f0_hz = config.f0_thz * 1e12
    return C_M_S * d_si * l_m * config.baud_hz ** 2 / (2.0 * f0_hz ** 2)


@lru_cache(maxsize=16)
def _filters(n_symbols: int, oversampling: int, baud_hz: float, rolloff: float,
             d_ps_nm_km: float, l_km: float, f0_thz: float):
    """Per-bin pulse filter and dispersion transfer for the whole block."""
    m = oversampling * n_symbols
    freqs = np.fft.fftfreq(m, d=1.0 / (oversampling * baud_hz))
    # sqrt(os/T_s) * G: dimensionless, DC gain sqrt(os); TX/RX cascade is the
    # Nyquist raised cosine scaled so decimation by os returns unit gain
    pulse = np.sqrt(oversampling * baud_hz) * rrc_amplitude(freqs, baud_hz, rolloff)
    disp = np.exp(1j * cd_phase(freqs, d_ps_nm_km, l_km, f0_thz))
    return pulse, disp


def prepare_record(config: LinkConfig, constellation: ConstellationSpec,
                   rng: np.random.Generator) -> PreparedRecord:
    """Run one realization of the chain, keeping the ASE contribution at unit
    per-sample variance so OSNR is applied afterwards (record_at_osnr).

    Stream consumption is fixed by (n_symbols, oversampling) alone and the
    draw order is: symbols, TX phase increments, LO phase increments, noise.
    Sweeps that vary only physics parameters therefore see common random
    numbers."""
    os_f = config.oversampling
    n = config.n_symbols
    m = os_f * n
    dt = 1.0 / (os_f * config.baud_hz)

    x = sample_symbols(constellation, n, rng)
    phi_tx = wiener_path(rng, config.lw_tx_hz, dt, m).phases
    phi_lo = wiener_path(rng, config.lw_lo_hz, dt, m).phases
    noise = complex_gaussian(rng, 1.0, size=m)

    pulse, disp = _filters(n, os_f, config.baud_hz, config.rolloff,
                           config.d_ps_nm_km, config.l_km, config.f0_thz)
    rx = pulse * np.conj(disp)

    x_up = np.zeros(m, dtype=complex)
    x_up[::os_f] = np.sqrt(config.p_scale) * x
    shaped = np.fft.ifft(np.fft.fft(x_up) * pulse)
    after_fiber = np.fft.ifft(np.fft.fft(shaped * np.exp(1j * phi_tx)) * disp)

    lo_field = np.exp(1j * phi_lo)
    y_signal = np.fft.ifft(np.fft.fft(after_fiber * lo_field) * rx)[::os_f]
    n_unit = np.fft.ifft(np.fft.fft(noise * lo_field) * rx)[::os_f]

    keep = slice(config.n_discard, n - config.n_discard)
    return PreparedRecord(x=x[keep],
                          phi_tx=phi_tx[::os_f][keep],
                          phi_lo=phi_lo[::os_f][keep],
                          y_signal=y_signal[keep],
                          n_unit=n_unit[keep],
                          config=config)


def record_at_osnr(prepared: PreparedRecord, osnr_db: float) -> ReceptionRecord:
    """Scale the unit-variance noise branch to the requested OSNR."""
    cfg = prepared.config
    sigma = np.sqrt(ase_variance(osnr_db, cfg.baud_hz, cfg.oversampling,
                                 p=cfg.p_scale))
    n = sigma * prepared.n_unit
    return ReceptionRecord(x=prepared.x, phi_tx=prepared.phi_tx,
                           phi_lo=prepared.phi_lo, n=n,
                           y=prepared.y_signal + n,
                           config=dataclasses.replace(cfg, osnr_db=osnr_db))


def simulate_link(config: LinkConfig, constellation: ConstellationSpec,
                  rng: np.random.Generator) -> ReceptionRecord:
    """One full realization at the config's own OSNR."""
    return record_at_osnr(prepare_record(config, constellation, rng),
                          config.osnr_db)


_RECORD_ARRAYS = ("x", "phi_tx", "phi_lo", "n", "y")
_COMPLEX_ARRAYS = ("x", "n", "y")


def dump_record(record: ReceptionRecord, path) -> None:
    """Binary record dump: one JSON header line, then the five sequences as
    little-endian float64, complex ones interleaved re/im."""
    header = {
        "format": "eepnsim-record-v1",
        "arrays": list(_RECORD_ARRAYS),
        "complex": list(_COMPLEX_ARRAYS),
        "dtype": "<f8",
        "length": len(record.x),
        "config": dataclasses.asdict(record.config),
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode())
        for name in _RECORD_ARRAYS:
            arr = getattr(record, name)
            if name in _COMPLEX_ARRAYS:
                flat = np.empty(2 * len(arr))
                flat[0::2] = arr.real
                flat[1::2] = arr.imag
            else:
                flat = np.asarray(arr, dtype=float)
            fh.write(flat.astype("<f8").tobytes())


def load_record(path) -> ReceptionRecord:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        payload = np.frombuffer(fh.read(), dtype="<f8")
    if header.get("format") != "eepnsim-record-v1":
        raise ConfigError(f"unrecognized record file {path}")
    n = header["length"]
    fields = {}
    offset = 0
    for name in header["arrays"]:
        if name in header["complex"]:
            chunk = payload[offset:offset + 2 * n]
            fields[name] = chunk[0::2] + 1j * chunk[1::2]
            offset += 2 * n
        else:
            fields[name] = payload[offset:offset + n].copy()
            offset += n
    return ReceptionRecord(config=LinkConfig(**header["config"]), **fields)
