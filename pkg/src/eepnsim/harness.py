"""Scenario orchestration: sweep expansion, per-point evaluation with
shared random streams, OSNR root-finding, and CSV/JSON/plot emission.

A scenario is one figure-shaped experiment: a sweep axis (linewidth,
OSNR, or CPR window), optional variant axes (format, baud, distance,
CPR algorithm, TX-follows-LO), and an evaluation kind. Points that
differ only along the sweep or the CPR axis share channel realizations,
which is what makes window optimization and penalty differencing
low-variance; the realization streams are derived from (master seed,
scenario hash, channel-variant index, realization index) so results do
not depend on the execution schedule.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import (
    B_REF_HZ,
    LinkConfig,
    PreparedRecord,
    cd_memory_symbols,
    dump_record,
    prepare_record,
    record_at_osnr,
)
from .constellation import ConstellationSpec, from_label
from .cpr import (
    CprSpec,
    apply_cpr,
    bps_distance_matrix,
    bps_phase_from_distances,
    genie_slip_removal,
    idr_estimate,
    lo_cancellation,
)
from .errors import ConfigError, RangeError
from .metrics import analytic_eepn_variance, extract_eepn
from .stochastic import derive_stream

KINDS = ("VARIANCE_SWEEP", "CPR_SWEEP", "LINEWIDTH_SWEEP", "OSNR_CURVE",
         "PENALTY_SWEEP")

# averaging-length axis evaluated when the window is optimized; a grid
# value l means the symmetric block 2l+1 around each symbol (fixed-window
# runs instead give the odd block length directly, see --window)
DEFAULT_WINDOW_GRID = (30, 40, 50, 70, 100, 200, 400, 700, 1000, 1200,
                       1600, 2000, 2500, 3000, 5000)

VARIANT_KEYS = ("baud_hz", "cpr", "distance_km", "format", "tx_equals_lo")

CSV_COLUMNS = ("scenario_kind", "format", "baud_hz", "distance_km",
               "lw_tx_hz", "lw_lo_hz", "osnr_db", "cpr", "window", "snr_db",
               "snr_std_db", "var_w", "best_window", "osnr_req_db",
               "pn_penalty_db", "total_penalty_db", "analytic_penalty_db",
               "n_realizations", "seed")

_SWEEP_AXES = {"VARIANCE_SWEEP": "lw_lo_hz", "CPR_SWEEP": "window",
               "LINEWIDTH_SWEEP": "lw_lo_hz", "OSNR_CURVE": "osnr_db",
               "PENALTY_SWEEP": "lw_lo_hz"}


@dataclass(frozen=True)
class Profile:
    name: str
    n_symbols: int
    n_realizations: int
    n_discard: int


DESK = Profile("desk", 2 ** 16, 4, 4000)
PAPER = Profile("paper", 2 ** 17, 10, 15000)
PROFILES = {"desk": DESK, "paper": PAPER}


@dataclass(frozen=True)
class Scenario:
    label: str
    kind: str
    base: LinkConfig
    constellation_label: str
    entropy_bits: float | None
    sweep_values: tuple
    variants: tuple  # sorted ((key, (values...)), ...)
    cpr: str  # algorithm name or "optimize"
    cpr_half_window: int | None
    n_test_phases: int
    tx_equals_lo: bool
    snr_ref: float | None
    window_candidates: tuple

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown scenario kind {self.kind!r}")
        if len(self.sweep_values) == 0:
            raise ConfigError("sweep values must be non-empty")
        if any(b <= a for a, b in zip(self.sweep_values, self.sweep_values[1:])):
            raise ConfigError("sweep values must be strictly increasing")
        if (self.snr_ref is not None) != (self.kind == "PENALTY_SWEEP"):
            raise ConfigError("snr_ref is required exactly for penalty sweeps")
        has_cpr_axis = False
        for key, values in self.variants:
            if key not in VARIANT_KEYS:
                raise ConfigError(f"unknown variant axis {key!r}")
            if len(values) == 0:
                raise ConfigError(f"variant axis {key!r} is empty")
            if key == "cpr":
                has_cpr_axis = True
                if self.kind != "CPR_SWEEP":
                    raise ConfigError("cpr variant axis only fits CPR_SWEEP")
                if any(v not in ("LO_CANCEL", "IDR", "BPS") for v in values):
                    raise ConfigError(f"bad cpr variant values {values}")
        if self.cpr not in ("optimize", "LO_CANCEL", "IDR", "BPS"):
            raise ConfigError(f"bad cpr selection {self.cpr!r}")
        if self.kind == "CPR_SWEEP" and not has_cpr_axis \
                and self.cpr == "optimize":
            raise ConfigError("CPR_SWEEP needs a cpr variant axis or a "
                              "fixed cpr algorithm")
        if self.cpr == "optimize" and len(self.window_candidates) < 2:
            raise ConfigError("window optimization needs >= 2 candidates")

    @property
    def sweep_axis(self) -> str:
        return _SWEEP_AXES[self.kind]


def load_scenario(source) -> Scenario:
    """Build a Scenario from a JSON file path or an already-parsed dict."""
    if isinstance(source, (str, os.PathLike)):
        try:
            with open(source) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read scenario file {source}: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scenario file {source} is not valid JSON: {exc}")
    else:
        doc = dict(source)

    base_fields = {f.name for f in dataclasses.fields(LinkConfig)}
    base_in = doc.get("base", {})
    bad = set(base_in) - base_fields
    if bad:
        raise ConfigError(f"unknown base config fields: {sorted(bad)}")
    try:
        base = LinkConfig(**base_in)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc

    con = doc.get("constellation", {"label": "QAM64"})
    label = con.get("label")
    if not label:
        raise ConfigError("constellation.label is required")
    entropy = con.get("entropy_bits")
    if entropy is None and label.upper() in ("PCS64", "TPCS64"):
        raise ConfigError(
            f"{label} needs constellation.entropy_bits (shaped format)")

    sweep = doc.get("sweep", {})
    values = tuple(sweep.get("values", ()))
    kind = doc.get("kind", "")
    axis = sweep.get("axis")
    if axis is not None and kind in _SWEEP_AXES and axis != _SWEEP_AXES[kind]:
        raise ConfigError(
            f"{kind} sweeps over {_SWEEP_AXES[kind]!r}, got {axis!r}")

    raw_variants = doc.get("variants", {})
    variants = []
    for key in sorted(raw_variants):
        vals = raw_variants[key]
        if key == "format":
            vals = tuple((v["label"], v.get("entropy_bits")) for v in vals)
        else:
            vals = tuple(vals)
        variants.append((key, vals))

    cpr_in = doc.get("cpr", "optimize")
    if isinstance(cpr_in, str):
        cpr, half, n_test = cpr_in, None, int(doc.get("n_test_phases", 64))
    else:
        cpr = cpr_in.get("algorithm", "BPS")
        w = cpr_in.get("window")
        half = None if w is None else int(w) // 2
        n_test = int(cpr_in.get("n_test_phases", 64))

    return Scenario(
        label=doc.get("label", "scenario"),
        kind=kind,
        base=base,
        constellation_label=label,
        entropy_bits=entropy,
        sweep_values=values,
        variants=tuple(variants),
        cpr=cpr,
        cpr_half_window=half,
        n_test_phases=n_test,
        tx_equals_lo=bool(doc.get("tx_equals_lo", False)),
        snr_ref=doc.get("snr_ref"),
        window_candidates=tuple(doc.get("window_candidates",
                                        DEFAULT_WINDOW_GRID)),
    )


def scenario_doc(scenario: Scenario) -> dict:
    """Canonical dict echo of a scenario (hashing and scenario.json)."""
    doc = dataclasses.asdict(scenario)
    doc["base"] = dataclasses.asdict(scenario.base)
    return doc


def scenario_hash(scenario: Scenario) -> int:
    blob = json.dumps(scenario_doc(scenario), sort_keys=True,
                      separators=(",", ":"), default=str)
    return zlib.crc32(blob.encode()) & 0x7FFFFFFF


def effective_discard(profile: Profile, config: LinkConfig) -> int:
    """Edge trim: at least the profile's, raised to cover the dispersion
    memory with 20% headroom plus the pulse-shaping tail."""
    mem = cd_memory_symbols(config)
    return max(profile.n_discard, int(np.ceil(1.2 * mem)) + 500)


@dataclass(frozen=True)
class ScenarioRow:
    scenario_kind: str
    format: str
    baud_hz: float
    distance_km: float
    lw_tx_hz: float
    lw_lo_hz: float
    osnr_db: float | None
    cpr: str
    window: int | None
    snr_db: float | None
    snr_std_db: float | None
    var_w: float | None
    best_window: int | None
    osnr_req_db: float | None
    pn_penalty_db: float | None
    total_penalty_db: float | None
    analytic_penalty_db: float | None
    n_realizations: int
    seed: int


@dataclass(frozen=True)
class PointStats:
    snr_db: float
    snr_std_db: float
    var_w: float
    n_realizations: int


# ---------------------------------------------------------------------------
# point evaluation on prepared records

def _pool(p_scale, n_vars, w_vars):
    snrs = [10 * np.log10(p_scale / v) for v in n_vars]
    pooled = 10 * np.log10(p_scale / np.mean(n_vars))
    std = float(np.std(snrs, ddof=1)) if len(snrs) > 1 else 0.0
    return PointStats(snr_db=float(pooled), snr_std_db=std,
                      var_w=float(np.mean(w_vars)), n_realizations=len(n_vars))


def _residual_var(rec, y_hat):
    amp = np.sqrt(rec.config.p_scale)
    return float(np.var(y_hat - amp * rec.x, ddof=1))


def point_snr(prepared, osnr_db, constellation, algorithm, half_window,
              n_test_phases=64) -> PointStats:
    """Pooled SNR of one CPR setting over the prepared realizations."""
    stats = snr_for_windows(prepared, osnr_db, constellation, algorithm,
                            [half_window], n_test_phases)
    return stats[half_window]


def snr_for_windows(prepared, osnr_db, constellation, algorithm,
                    half_windows, n_test_phases=64) -> dict:
    """Pooled SNR per half-window, sharing records (and for BPS the
    distance matrix) across the candidate windows."""
    half_windows = list(dict.fromkeys(half_windows))
    n_vars = {h: [] for h in half_windows}
    w_vars = []
    p = prepared[0].config.p_scale
    for prep in prepared:
        rec = record_at_osnr(prep, osnr_db)
        w_vars.append(float(np.var(extract_eepn(rec), ddof=1)))
        ref = rec.phi_tx + rec.phi_lo
        if algorithm == "LO_CANCEL":
            var = _residual_var(rec, lo_cancellation(rec).y_hat)
            for h in half_windows:
                n_vars[h].append(var)
        elif algorithm == "IDR":
            for h in half_windows:
                res = idr_estimate(rec, CprSpec(algorithm="IDR", half_window=h))
                n_vars[h].append(_residual_var(rec, res.y_hat))
        elif algorithm == "BPS":
            d = bps_distance_matrix(rec.y, constellation, n_test_phases)
            for h in half_windows:
                phi = bps_phase_from_distances(d, n_test_phases, h)
                phi = genie_slip_removal(phi, ref)
                n_vars[h].append(_residual_var(rec, apply_cpr(rec.y, phi)))
        else:
            raise ConfigError(f"unknown CPR algorithm {algorithm!r}")
    return {h: _pool(p, n_vars[h], w_vars) for h in half_windows}


def select_best(candidates, snrs):
    """Argmax with ties resolved to the smaller candidate (candidates are
    ascending, so the first maximum wins)."""
    return int(np.argmax(snrs))


def optimize_bps_window(prepared, osnr_db, constellation, candidates,
                        n_test_phases=64):
    """Evaluate every candidate averaging length on the same records and
    return (best length, its PointStats). Candidates are axis values l:
    each is run as the symmetric block of 2l+1 symbols."""
    if len(candidates) < 2:
        raise ConfigError("need at least 2 window candidates")
    halves = [int(c) for c in candidates]
    stats = snr_for_windows(prepared, osnr_db, constellation, "BPS", halves,
                            n_test_phases)
    snrs = [stats[h].snr_db for h in halves]
    i = select_best(candidates, snrs)
    return int(candidates[i]), stats[halves[i]]


# ---------------------------------------------------------------------------
# OSNR root finding

@dataclass(frozen=True)
class SolveResult:
    osnr_db: float  # nan when the SNR saturates below the target
    best_window: int | None
    n_evals: int


def solve_osnr(eval_fn, snr_ref, osnr_ase_db, span=(-4, 12),
               refine_db=0.01, plateau_db=0.02) -> SolveResult:
    """Invert a monotone SNR(OSNR) curve to the target.

    Walks a 1 dB lattice centered on the additive-noise-only requirement
    (extended upward when the penalty is large), declares saturation
    (nan) when the curve gains less than plateau_db per lattice step while
    still under target, then bisects the bracketing cell down to refine_db.
    eval_fn(osnr_db, refining) -> (snr_db, aux); refining=True marks the
    bisection phase so the evaluator may reuse work from the lattice walk.
    aux of the accepted evaluation is reported (window at the solution).
    """
    lo_k, hi_k = span
    cache = {}
    evals = 0

    def at(k):
        nonlocal evals
        if k not in cache:
            cache[k] = eval_fn(osnr_ase_db + k, False)
            evals += 1
        return cache[k]

    k = 0
    if at(k)[0] >= snr_ref:
        while k > lo_k and at(k - 1)[0] >= snr_ref:
            k -= 1
        if k == lo_k:
            raise RangeError(
                f"target {snr_ref} dB already met at the lattice floor",
                achieved_min=min(v[0] for v in cache.values()),
                achieved_max=max(v[0] for v in cache.values()))
        bracket = (k - 1, k)
    else:
        while True:
            if k == hi_k:
                raise RangeError(
                    f"target {snr_ref} dB not reached by OSNR {osnr_ase_db + hi_k}",
                    achieved_min=min(v[0] for v in cache.values()),
                    achieved_max=max(v[0] for v in cache.values()))
            nxt, _ = at(k + 1)
            if nxt >= snr_ref:
                bracket = (k, k + 1)
                break
            if nxt - at(k)[0] < plateau_db:
                return SolveResult(osnr_db=float("nan"), best_window=None,
                                   n_evals=evals)
            k += 1

    lo = osnr_ase_db + bracket[0]
    hi = osnr_ase_db + bracket[1]
    aux = at(bracket[1])[1]
    while hi - lo > refine_db:
        mid = 0.5 * (lo + hi)
        snr_mid, aux_mid = eval_fn(mid, True)
        evals += 1
        if snr_mid >= snr_ref:
            hi, aux = mid, aux_mid
        else:
            lo = mid
    return SolveResult(osnr_db=float(hi), best_window=aux, n_evals=evals)


def osnr_required(prepared, constellation, scenario, config,
                  snr_ref) -> SolveResult:
    """Required OSNR for the target SNR on the prepared realizations.

    The averaging length is optimized over the full candidate grid at
    each lattice OSNR; bisection steps only revisit lengths that already
    won somewhere on the walk (the optimum moves slowly with OSNR, and
    the bracket endpoints are always part of the walk)."""
    osnr_ase = snr_ref - 10 * np.log10(B_REF_HZ / config.baud_hz)
    winners = set()

    def ev(osnr_db, refining):
        if scenario.cpr != "optimize":
            half = scenario.cpr_half_window or 0
            st = point_snr(prepared, osnr_db, constellation, scenario.cpr,
                           half, scenario.n_test_phases)
            return st.snr_db, 2 * half + 1
        if refining and len(winners) >= 1:
            grid = sorted(winners)
            if len(grid) == 1:
                st = point_snr(prepared, osnr_db, constellation, "BPS",
                               grid[0], scenario.n_test_phases)
                return st.snr_db, grid[0]
        else:
            grid = scenario.window_candidates
        best, stats = optimize_bps_window(prepared, osnr_db, constellation,
                                          grid, scenario.n_test_phases)
        winners.add(best)
        return stats.snr_db, best

    return solve_osnr(ev, snr_ref, osnr_ase)


# ---------------------------------------------------------------------------
# scenario expansion and execution

@dataclass(frozen=True)
class ChannelVariant:
    """One combination of the non-sweep axes; points along the sweep and
    the CPR axis share this variant's realization streams."""
    gidx: int
    overrides: tuple  # ((config field, value), ...)
    format_label: str
    entropy_bits: float | None
    cpr_list: tuple
    tx_equals_lo: bool


def expand_variants(scenario: Scenario):
    axes = dict(scenario.variants)
    cpr_list = tuple(axes.pop("cpr", (scenario.cpr,)))
    formats = axes.pop("format",
                       ((scenario.constellation_label, scenario.entropy_bits),))
    tx_modes = axes.pop("tx_equals_lo", (scenario.tx_equals_lo,))
    keys = sorted(axes)
    combos = list(itertools.product(*(axes[k] for k in keys))) or [()]
    out = []
    gidx = 0
    for fmt in formats:
        for combo in combos:
            for tx in tx_modes:
                out.append(ChannelVariant(
                    gidx=gidx,
                    overrides=tuple(zip(keys, combo)),
                    format_label=fmt[0] if isinstance(fmt, tuple) else fmt,
                    entropy_bits=(fmt[1] if isinstance(fmt, tuple) else None),
                    cpr_list=cpr_list,
                    tx_equals_lo=bool(tx),
                ))
                gidx += 1
    return out


def _variant_config(scenario, variant, profile, sweep_value):
    fields = dataclasses.asdict(scenario.base)
    for key, val in variant.overrides:
        fields["l_km" if key == "distance_km" else key] = val
    axis = scenario.sweep_axis
    if axis != "window" and sweep_value is not None:
        fields[axis] = float(sweep_value)
    if variant.tx_equals_lo:
        fields["lw_tx_hz"] = fields["lw_lo_hz"]
    fields["n_symbols"] = profile.n_symbols
    fields["n_realizations"] = profile.n_realizations
    probe = LinkConfig(**{**fields, "n_discard": 0})
    fields["n_discard"] = effective_discard(profile, probe)
    return LinkConfig(**fields)


def _constellation(variant) -> ConstellationSpec:
    return from_label(variant.format_label, entropy_bits=variant.entropy_bits)


def _prepare(config, constellation, seed, h, gidx):
    recs = []
    for r in range(config.n_realizations):
        rng = derive_stream(seed, [h, gidx, r])
        recs.append(prepare_record(config, constellation, rng))
    return recs


def _row_base(scenario, variant, config, seed):
    return dict(
        scenario_kind=scenario.kind,
        format=variant.format_label,
        baud_hz=config.baud_hz,
        distance_km=config.l_km,
        lw_tx_hz=config.lw_tx_hz,
        lw_lo_hz=config.lw_lo_hz,
        osnr_db=config.osnr_db,
        cpr="", window=None, snr_db=None, snr_std_db=None, var_w=None,
        best_window=None, osnr_req_db=None, pn_penalty_db=None,
        total_penalty_db=None, analytic_penalty_db=None,
        n_realizations=config.n_realizations,
        seed=seed,
    )


def _eval_variant(scenario, variant, profile, seed, h, point_indices,
                  dump_dir=None):
    """Evaluate every sweep point of one channel variant. Returns rows
    keyed by point index."""
    rows = {}
    kind = scenario.kind

    if kind in ("CPR_SWEEP", "OSNR_CURVE"):
        nominal = scenario.sweep_values[0] if kind == "OSNR_CURVE" else None
        config = _variant_config(scenario, variant, profile, nominal)
        constellation = _constellation(variant)
        prepared = _prepare(config, constellation, seed, h, variant.gidx)
        _maybe_dump(dump_dir, prepared, config, min(point_indices.values()))
        if kind == "CPR_SWEEP":
            for algo in variant.cpr_list:
                halves = [int(n) for n in scenario.sweep_values]
                table = snr_for_windows(prepared, config.osnr_db,
                                        constellation, algo, halves,
                                        scenario.n_test_phases)
                for value, half in zip(scenario.sweep_values, halves):
                    idx = point_indices[(algo, value)]
                    st = table[half]
                    row = _row_base(scenario, variant, config, seed)
                    row.update(cpr=algo, window=int(value), snr_db=st.snr_db,
                               snr_std_db=st.snr_std_db, var_w=st.var_w)
                    rows[idx] = ScenarioRow(**row)
        else:  # OSNR_CURVE
            for value in scenario.sweep_values:
                idx = point_indices[value]
                row = _row_base(scenario, variant, config, seed)
                row["osnr_db"] = float(value)
                if scenario.cpr == "optimize":
                    best, st = optimize_bps_window(
                        prepared, value, constellation,
                        scenario.window_candidates, scenario.n_test_phases)
                    row.update(cpr="BPS", best_window=best)
                else:
                    half = scenario.cpr_half_window or 0
                    st = point_snr(prepared, value, constellation,
                                   scenario.cpr, half, scenario.n_test_phases)
                    row.update(cpr=scenario.cpr, window=2 * half + 1)
                row.update(snr_db=st.snr_db, snr_std_db=st.snr_std_db,
                           var_w=st.var_w)
                rows[idx] = ScenarioRow(**row)
        return rows

    for value in scenario.sweep_values:
        idx = point_indices[value]
        config = _variant_config(scenario, variant, profile, value)
        constellation = _constellation(variant)
        prepared = _prepare(config, constellation, seed, h, variant.gidx)
        _maybe_dump(dump_dir, prepared, config, idx)
        row = _row_base(scenario, variant, config, seed)

        if kind == "VARIANCE_SWEEP":
            w_vars = [float(np.var(extract_eepn(record_at_osnr(p, config.osnr_db)),
                                   ddof=1)) for p in prepared]
            row.update(var_w=float(np.mean(w_vars)))
        elif kind == "LINEWIDTH_SWEEP":
            if scenario.cpr == "optimize":
                best, st = optimize_bps_window(
                    prepared, config.osnr_db, constellation,
                    scenario.window_candidates, scenario.n_test_phases)
                row.update(cpr="BPS", best_window=best)
            else:
                half = scenario.cpr_half_window or 0
                st = point_snr(prepared, config.osnr_db, constellation,
                               scenario.cpr, half, scenario.n_test_phases)
                row.update(cpr=scenario.cpr, window=2 * half + 1)
            row.update(snr_db=st.snr_db, snr_std_db=st.snr_std_db,
                       var_w=st.var_w)
        elif kind == "PENALTY_SWEEP":
            row.update(_penalty_point(scenario, variant, config,
                                      constellation, prepared, seed, h))
            row["osnr_db"] = None
        rows[idx] = ScenarioRow(**row)
    return rows


def _penalty_point(scenario, variant, config, constellation, prepared,
                   seed, h):
    """PN-only and total OSNR penalties relative to the additive-noise-only
    requirement, plus the closed-form equivalent-AWGN prediction."""
    snr_ref = scenario.snr_ref
    osnr_ase = snr_ref - 10 * np.log10(B_REF_HZ / config.baud_hz)

    total = osnr_required(prepared, constellation, scenario, config, snr_ref)

    # same streams, dispersion coefficient forced to zero
    flat_cfg = dataclasses.replace(config, d_ps_nm_km=0.0)
    flat = _prepare(flat_cfg, constellation, seed, h, variant.gidx)
    pn = osnr_required(flat, constellation, scenario, flat_cfg, snr_ref)

    ref_lin = 10 ** (snr_ref / 10)
    var = analytic_eepn_variance(config, config.lw_lo_hz)
    denom = 1 - ref_lin * var
    analytic = -10 * np.log10(denom) if denom > 0 else float("nan")

    return dict(
        cpr="BPS" if scenario.cpr == "optimize" else scenario.cpr,
        best_window=total.best_window,
        osnr_req_db=total.osnr_db,
        pn_penalty_db=pn.osnr_db - osnr_ase,
        total_penalty_db=total.osnr_db - osnr_ase,
        analytic_penalty_db=float(analytic),
    )


def _maybe_dump(dump_dir, prepared, config, idx):
    if dump_dir is None:
        return
    os.makedirs(dump_dir, exist_ok=True)
    rec = record_at_osnr(prepared[0], config.osnr_db)
    dump_record(rec, os.path.join(dump_dir, f"point_{idx:04d}.bin"))


def _point_index_table(scenario, variants):
    """Deterministic point numbering: variant-major, then CPR axis, then
    sweep value."""
    tables = {}
    idx = 0
    for variant in variants:
        table = {}
        if scenario.kind == "CPR_SWEEP":
            for algo in variant.cpr_list:
                for value in scenario.sweep_values:
                    table[(algo, value)] = idx
                    idx += 1
        else:
            for value in scenario.sweep_values:
                table[value] = idx
                idx += 1
        tables[variant.gidx] = table
    return tables, idx


def run_scenario(scenario: Scenario, master_seed: int, profile: Profile = DESK,
                 threads: int = 1, dump_dir=None):
    """Evaluate all points; deterministic for fixed (scenario, seed)
    regardless of thread count."""
    h = scenario_hash(scenario)
    variants = expand_variants(scenario)
    tables, n_points = _point_index_table(scenario, variants)

    def work(variant):
        return _eval_variant(scenario, variant, profile, master_seed, h,
                             tables[variant.gidx], dump_dir)

    rows = {}
    if threads <= 1:
        for variant in variants:
            rows.update(work(variant))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for got in pool.map(work, variants):
                rows.update(got)
    return [rows[i] for i in sorted(rows)]


# ---------------------------------------------------------------------------
# emission

def _fmt(name, value):
    if value is None:
        return ""
    if name in ("window", "best_window", "n_realizations", "seed"):
        return str(int(value))
    if name in ("scenario_kind", "format", "cpr"):
        return str(value)
    if name == "var_w":
        return format(float(value), ".6e")
    if name in ("baud_hz", "distance_km", "lw_tx_hz", "lw_lo_hz"):
        return format(float(value), ".10g")
    return format(float(value), ".4f")  # dB quantities


def rows_to_csv(rows) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        d = dataclasses.asdict(row)
        lines.append(",".join(_fmt(c, d[c]) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


_PLOT_STUB = """#!/usr/bin/env python3
\"\"\"Render the figure analog for the results.csv next to this script.\"\"\"
import os
from eepnsim.plotting import render_csv

here = os.path.dirname(os.path.abspath(__file__))
render_csv(os.path.join(here, "results.csv"),
           os.path.join(here, "figure.png"),
           scenario_json=os.path.join(here, "scenario.json"))
print("wrote", os.path.join(here, "figure.png"))
"""


def emit_outputs(rows, out_dir, scenario: Scenario, seed: int,
                 profile: Profile):
    """results.csv + scenario.json + plot.py. Refuses empty row sets
    before touching the filesystem."""
    if not rows:
        raise ConfigError("no rows to emit")
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "results.csv"), "w", newline="") as fh:
        fh.write(rows_to_csv(rows))
    echo = {"scenario": scenario_doc(scenario), "seed": seed,
            "profile": dataclasses.asdict(profile),
            "scenario_hash": scenario_hash(scenario)}
    with open(os.path.join(out_dir, "scenario.json"), "w") as fh:
        json.dump(echo, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    with open(os.path.join(out_dir, "plot.py"), "w") as fh:
        fh.write(_PLOT_STUB)
    return os.path.join(out_dir, "results.csv")
