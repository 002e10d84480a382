"""Rendering of emitted results: one figure analog per scenario CSV, plus
the distribution / correlation diagnostics drawn by the validate command.

Everything goes through the Agg backend so rendering works headless.
These are working plots for inspecting a run, not publication typesetting:
one axes per figure, grouped series, plain labels.
"""

import csv
import dataclasses
import json

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy import stats as sstats

from .channel import LinkConfig
from .errors import ConfigError
from .metrics import analytic_eepn_variance, analytic_snr

_NUMERIC = ("baud_hz", "distance_km", "lw_tx_hz", "lw_lo_hz", "osnr_db",
            "window", "snr_db", "snr_std_db", "var_w", "best_window",
            "osnr_req_db", "pn_penalty_db", "total_penalty_db",
            "analytic_penalty_db", "n_realizations", "seed")


def _read_rows(csv_path):
    with open(csv_path) as fh:
        raw = list(csv.DictReader(fh))
    if not raw:
        raise ConfigError(f"no data rows in {csv_path}")
    rows = []
    for r in raw:
        row = dict(r)
        for name in _NUMERIC:
            v = r.get(name, "")
            row[name] = float(v) if v not in ("", None) else None
        rows.append(row)
    return rows


def _base_config(scenario_json):
    if scenario_json is None:
        return None
    with open(scenario_json) as fh:
        echo = json.load(fh)
    try:
        return LinkConfig(**echo["scenario"]["base"])
    except (KeyError, TypeError):
        return None


def _groups(rows, keys):
    """Rows bucketed by the key columns, plus the subset of keys that
    actually vary (used to keep legend labels short)."""
    out = {}
    for r in rows:
        out.setdefault(tuple(r[k] for k in keys), []).append(r)
    varying = [i for i, k in enumerate(keys)
               if len({key[i] for key in out}) > 1]
    return out, varying


def _label(keys, key, varying):
    if not varying:
        return None
    parts = []
    for i in varying:
        v = key[i]
        if isinstance(v, float) and abs(v) >= 1e4:
            v = f"{v:g}"
        parts.append(f"{keys[i]}={v}")
    return ", ".join(parts)


def _xy(rows, x_name, y_name):
    pts = [(r[x_name], r[y_name]) for r in rows
           if r[x_name] is not None and r[y_name] is not None
           and not np.isnan(r[y_name])]
    pts.sort()
    return [p[0] for p in pts], [p[1] for p in pts]


def _render_variance(ax, rows, base):
    keys = ("format", "baud_hz", "distance_km")
    groups, varying = _groups(rows, keys)
    for key, grp in sorted(groups.items()):
        x, y = _xy(grp, "lw_lo_hz", "var_w")
        ax.loglog(x, y, "o-", label=_label(keys, key, varying))
        if base is not None and x:
            cfg = dataclasses.replace(base, l_km=key[2])
            lws = np.geomspace(min(x), max(x), 50)
            ref = [analytic_eepn_variance(cfg, lw, baud_hz=key[1])
                   for lw in lws]
            ax.loglog(lws, ref, "k--", lw=0.8)
    ax.set_xlabel("LO linewidth [Hz]")
    ax.set_ylabel("residual distortion variance")


def _render_cpr(ax, rows, base):
    keys = ("cpr", "format", "distance_km")
    groups, varying = _groups(rows, keys)
    for key, grp in sorted(groups.items()):
        x, y = _xy(grp, "window", "snr_db")
        ax.semilogx(x, y, "o-", label=_label(keys, key, varying))
    ax.set_xlabel("averaging length [symbols]")
    ax.set_ylabel("SNR [dB]")


def _render_linewidth(ax, rows, base):
    keys = ("format", "baud_hz", "distance_km")
    groups, varying = _groups(rows, keys)
    for key, grp in sorted(groups.items()):
        x, y = _xy(grp, "lw_lo_hz", "snr_db")
        ax.semilogx(x, y, "o-", label=_label(keys, key, varying))
        if base is not None and x and grp[0]["osnr_db"] is not None:
            cfg = dataclasses.replace(base, l_km=key[2])
            osnr = grp[0]["osnr_db"]
            lws = np.geomspace(min(x), max(x), 50)
            awgn = [analytic_snr(osnr, key[1], cfg, lw) for lw in lws]
            ax.semilogx(lws, awgn, "k--", lw=0.8)
            flat = analytic_snr(osnr, key[1], cfg, 0.0, include_eepn=False)
            ax.axhline(flat, color="k", lw=0.8)
    ax.set_xlabel("LO linewidth [Hz]")
    ax.set_ylabel("SNR [dB]")


def _render_osnr(ax, rows, base):
    keys = ("format", "baud_hz", "distance_km")
    groups, varying = _groups(rows, keys)
    for key, grp in sorted(groups.items()):
        x, y = _xy(grp, "osnr_db", "snr_db")
        ax.plot(x, y, "o-", label=_label(keys, key, varying))
        if base is not None and x:
            cfg = dataclasses.replace(base, l_km=key[2])
            lw = grp[0]["lw_lo_hz"]
            osnrs = np.linspace(min(x), max(x), 50)
            ase = [analytic_snr(o, key[1], cfg, 0.0, include_eepn=False)
                   for o in osnrs]
            ax.plot(osnrs, ase, "k-", lw=0.8)
            if key[2] > 0 and lw:
                awgn = [analytic_snr(o, key[1], cfg, lw) for o in osnrs]
                ax.plot(osnrs, awgn, "k--", lw=0.8)
    ax.set_xlabel("OSNR [dB/0.1nm]")
    ax.set_ylabel("SNR [dB]")


def _render_penalty(ax, rows, base):
    def tx_mode(r):
        return "TX=LO" if r["lw_tx_hz"] == r["lw_lo_hz"] else "TX=0"

    keys = ("format", "baud_hz", "distance_km")
    groups, varying = _groups(rows, keys)
    for key, grp in sorted(groups.items()):
        by_mode = {}
        for r in grp:
            by_mode.setdefault(tx_mode(r), []).append(r)
        for mode, sub in sorted(by_mode.items()):
            stem = _label(keys, key, varying)
            stem = f"{stem}, {mode}" if stem else mode
            x, y = _xy(sub, "lw_lo_hz", "total_penalty_db")
            ax.semilogx(x, y, "o-", label=f"{stem} total")
            x, y = _xy(sub, "lw_lo_hz", "pn_penalty_db")
            ax.semilogx(x, y, "d--", label=f"{stem} PN")
        x, y = _xy(grp, "lw_lo_hz", "analytic_penalty_db")
        if x:
            xs, ys = zip(*sorted(set(zip(x, y))))
            ax.semilogx(xs, ys, "k:", lw=1.0, label="equivalent-AWGN model")
    ax.set_xlabel("linewidth [Hz]")
    ax.set_ylabel("OSNR penalty [dB]")


_RENDERERS = {
    "VARIANCE_SWEEP": _render_variance,
    "CPR_SWEEP": _render_cpr,
    "LINEWIDTH_SWEEP": _render_linewidth,
    "OSNR_CURVE": _render_osnr,
    "PENALTY_SWEEP": _render_penalty,
}


def render_csv(csv_path, out_png, scenario_json=None):
    """Draw the figure analog for one emitted results.csv."""
    rows = _read_rows(csv_path)
    kind = rows[0]["scenario_kind"]
    if kind not in _RENDERERS:
        raise ConfigError(f"cannot render scenario kind {kind!r}")
    base = _base_config(scenario_json)
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    _RENDERERS[kind](ax, rows, base)
    ax.grid(True, which="both", alpha=0.3)
    handles, _ = ax.get_legend_handles_labels()
    if handles:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_png, dpi=130)
    plt.close(fig)
    return out_png


# ---------------------------------------------------------------------------
# validate-mode diagnostics

def render_pdf(values, out_png, title=""):
    """Normalized distribution of the real part against the moment-matched
    Gaussian, on a log scale where tail departures are visible."""
    re = np.real(np.asarray(values))
    dens, edges = np.histogram(re, bins="fd", density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    mean, sd = float(np.mean(re)), float(np.std(re, ddof=1))
    grid = np.linspace(edges[0], edges[-1], 400)

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.semilogy(centers, dens, "C0--", label="simulated")
    ax.semilogy(grid, sstats.norm.pdf(grid, mean, sd), "k-", lw=1.0,
                label="gaussian fit")
    ax.set_ylim(bottom=max(dens[dens > 0].min() * 0.5, 1e-6))
    ax.set_xlabel("real part")
    ax.set_ylabel("normalized PDF")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=130)
    plt.close(fig)
    return out_png


def render_crosscorr(lags, values, out_png, half_width=None, title=""):
    """Normalized cross-correlation magnitude vs. lag, with the half-maximum
    level and (when it exists) the measured half-width marked."""
    mag = np.abs(np.asarray(values))
    if mag[0] == 0:
        raise ConfigError("zero-lag correlation is zero, nothing to normalize")
    mag = mag / mag[0]

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.plot(lags, mag, "C0-")
    ax.axhline(0.5, color="k", lw=0.8, ls=":")
    if half_width is not None and np.isfinite(half_width):
        ax.axvline(half_width, color="C3", lw=0.8, ls="--",
                   label=f"half-width = {half_width:.0f}")
        ax.legend(fontsize=8)
    ax.set_xlabel("lag [symbols]")
    ax.set_ylabel("|cross-correlation| (normalized)")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=130)
    plt.close(fig)
    return out_png
