"""CSV emission for one run and the per-preset summary table.

Floats are written with ``repr`` so every file round-trips exactly and two
runs of the same configuration and seed produce identical bytes.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .config import dump_config
from .metrics import colliding_grant_totals
from .sim import RunResult

SUMMARY_FIELDS = ("mechanism", "seed", "mean_cbr", "mean_pdr_by_bin", "mean_ipg",
                  "awareness_mean", "awareness_std", "gamma", "gamma_mt", "gamma_nf", "gamma_tsim")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if math.isnan(v) else repr(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def summarize(result: RunResult) -> dict:
    pdr = [r[4] for r in result.pdr.rows()]
    cbr = [r[2] for r in result.cbr_rows]
    aw = np.array([r[2] for r in result.awareness_rows], dtype=float)
    total, mt, nf, tsim = colliding_grant_totals(result.collisions)
    return {
        "mechanism": result.mechanism,
        "seed": result.seed,
        "mean_cbr": float(np.mean(cbr)) if cbr else math.nan,
        "mean_pdr_by_bin": float(np.mean(pdr)) if pdr else math.nan,
        "mean_ipg": result.ipg.mean(),
        "awareness_mean": float(aw.mean()) if aw.size else math.nan,
        "awareness_std": float(aw.std()) if aw.size else math.nan,
        "gamma": total, "gamma_mt": mt, "gamma_nf": nf, "gamma_tsim": tsim,
    }


def _grant_rows(result: RunResult):
    for t, event, v, gid, detail in result.grant_events:
        if event == "colliding":
            peer_v, peer_g, cause = detail.split(":")
            yield t, event, v, gid, peer_v, peer_g, cause, ""
        else:
            yield t, event, v, gid, "", "", "", detail


def write_run(result: RunResult, out: Path, trace_grants: bool = False,
              trace_channel: bool = False) -> dict:
    """Write every per-seed file into ``out`` and return the summary row."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config.with_seed(result.seed)
    (out / "config.ini").write_text(dump_config(cfg))

    write_csv(out / "pdr.csv", ("bin_lo", "bin_hi", "decoded", "total", "pdr"), result.pdr.rows())
    write_csv(out / "cbr.csv", ("time_ms", "vehicle", "cbr", "cr"), result.cbr_rows)
    rx, src, gap, count = result.ipg.table()
    write_csv(out / "ipg.csv", ("rx", "src", "gap_ms", "count"), zip(rx, src, gap, count))
    write_csv(out / "awareness.csv", ("time_ms", "vehicle", "fraction"), result.awareness_rows)
    write_csv(out / "grants.csv", ("time_ms", "event", "vehicle", "grant", "peer_vehicle",
                                   "peer_grant", "cause", "detail"), _grant_rows(result))
    if trace_grants:
        rows = [(t, v, g, "opportunity", "", "", int(tx)) for t, v, g, tx in result.opportunity_log]
        rows += [(t, v, g, "sci", rri, rrc, "") for t, v, g, rri, rrc in result.sci_log]
        rows.sort(key=lambda r: (r[0], r[1], r[3] == "sci"))
        write_csv(out / "grant_trace.csv", ("time_ms", "vehicle", "grant", "kind", "announced_rri",
                                            "rrc", "transmitted"), rows)
    if trace_channel:
        write_csv(out / "channel_trace.csv", ("time_ms", "vehicle", "cbr", "cr", "reactive_state",
                                              "t_off", "adaptive_rate", "rri"), result.control_trace)
        write_csv(out / "gate_trace.csv", ("time_ms", "vehicle", "cbr", "cr", "decision"),
                  result.gate_log)
    row = summarize(result)
    write_csv(out / "summary.csv", SUMMARY_FIELDS, [[row[k] for k in SUMMARY_FIELDS]])
    return row


def write_summary(rows: list[dict], path: Path) -> None:
    """Seed-averaged table with one row per mechanism, in first-seen order."""
    order, groups = [], {}
    for r in rows:
        if r["mechanism"] not in groups:
            order.append(r["mechanism"])
            groups[r["mechanism"]] = []
        groups[r["mechanism"]].append(r)
    out = []
    for name in order:
        g = groups[name]
        line = [name, " ".join(str(r["seed"]) for r in g)]
        for k in SUMMARY_FIELDS[2:]:
            vals = [r[k] for r in g if not (isinstance(r[k], float) and math.isnan(r[k]))]
            line.append(float(np.mean(vals)) if vals else math.nan)
        out.append(line)
    write_csv(path, ("mechanism", "seeds") + SUMMARY_FIELDS[2:], out)
