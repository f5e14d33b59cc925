"""Acceptance criteria 1-13.

Each test records a one-line verdict that is printed in the terminal summary,
whether it passes or fails. Desk-scale runs are cached for the session.
"""

import math
from collections import defaultdict
from dataclasses import replace
from functools import lru_cache

import numpy as np
import pytest

from cv2x_dcc.config import RunConfig
from cv2x_dcc.congestion import Kind, ReactiveState, Table, cr_limit, reactive_lookup
from cv2x_dcc.metrics import colliding_grant_totals, mean_pdr
from cv2x_dcc.output import write_run
from cv2x_dcc.presets import DESK_SEEDS, get_preset
from cv2x_dcc.sim import simulate

pytestmark = pytest.mark.acceptance

VERDICTS: dict[int, str] = {}


def verdict(n, ok, detail):
    VERDICTS[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, VERDICTS[n]


@lru_cache(maxsize=None)
def preset_runs(name):
    """{variant name: [RunResult per desk seed]}"""
    return {cfg.name: [simulate(cfg.with_seed(s), s) for s in cfg.seeds]
            for cfg in get_preset(name).configs(desk=True)}


def cbr20():
    return preset_runs("cbr20")


def cbr60():
    return preset_runs("cbr60")


def fig3():
    return preset_runs("fig3")


def mean_cbr(res):
    return float(np.mean([r[2] for r in res.cbr_rows]))


def pdr_from(res, lo, hi=math.inf):
    return mean_pdr(res.pdr.rows(), lo, hi)


def avg(runs, f):
    return float(np.mean([f(r) for r in runs]))


def gamma(res):
    return colliding_grant_totals(res.collisions)


# -- 1 ----------------------------------------------------------------------

def test_c01_meter_oracles():
    cfg = get_preset("cbr20").configs(desk=True)[3]  # DropAggressive: CR and CBR both move
    cfg = replace(cfg, metrics=replace(cfg.metrics, verify_meters=True))
    res = simulate(cfg.with_seed(1), 1)
    bad = sum(1 for _, _, c, cb, r, rb in res.meter_checks if c != cb or r != rb)
    verdict(1, bad == 0 and len(res.meter_checks) > 10_000,
            f"{len(res.meter_checks)} samples of {cfg.name}, {bad} mismatches")


# -- 2 ----------------------------------------------------------------------

REACTIVE = [(0.0, 0.3, ReactiveState.RELAXED, 100), (0.3, 0.4, ReactiveState.ACTIVE1, 200),
            (0.4, 0.5, ReactiveState.ACTIVE2, 400), (0.5, 0.6, ReactiveState.ACTIVE3, 500),
            (0.6, 1.0, ReactiveState.RESTRICTIVE, 1000)]
ETSI = [(0.0, 0.3, (None, None, None)), (0.3, 0.65, (None, 0.03, 0.02)),
        (0.65, 0.8, (0.02, 0.006, 0.004)), (0.8, 1.0, (0.002, 0.003, 0.002))]
GPP3 = [(0.0, 0.65, None), (0.65, 0.675, 1.6e-3), (0.675, 0.7, 1.5e-3), (0.7, 0.725, 1.4e-3),
        (0.725, 0.75, 1.3e-3), (0.75, 0.775, 1.2e-3), (0.775, 0.8, 1.2e-3), (0.8, 0.825, 1.1e-3),
        (0.825, 0.85, 1.1e-3), (0.85, 0.875, 1.0e-3), (0.875, 1.0, 0.8e-3)]


def test_c02_table_conformance():
    errors = []
    checks = 0

    def check(got, want, what):
        nonlocal checks
        checks += 1
        if got != want:
            errors.append(f"{what}: {got} != {want}")

    for lo, hi, state, t_off in REACTIVE:  # [lo, hi)
        for x in ((lo + hi) / 2, lo, math.nextafter(hi, 0)):
            check(reactive_lookup(x), (state, t_off), f"reactive {x}")
    for lo, hi, limits in ETSI:  # (lo, hi]
        for prio, col in ((1, 0), (2, 0), (3, 1), (4, 1), (5, 1), (6, 2), (7, 2), (8, 2)):
            for x in ((lo + hi) / 2, hi) + ((math.nextafter(lo, 1),) if lo > 0 else (0.0,)):
                check(cr_limit(Table.ETSI, x, prio), limits[col], f"etsi p{prio} {x}")
    for lo, hi, limit in GPP3:  # (lo, hi]
        for x in ((lo + hi) / 2, hi) + ((math.nextafter(lo, 1),) if lo > 0 else (0.0,)):
            check(cr_limit(Table.GPP3, x), limit, f"3gpp {x}")
            if x - 0.45 >= 0:
                check(cr_limit(Table.AGGRESSIVE, x - 0.45), limit, f"aggressive {x - 0.45}")
    verdict(2, not errors, f"{checks} lookups, {len(errors)} wrong {errors[:3]}")


# -- 3 ----------------------------------------------------------------------

def test_c03_gamma_mt_nullity():
    runs = cbr20()["RriLookup"] + cbr20()["RriCrLimitAggressive"] + cbr60()["RriCrLimit"]
    mt = sum(gamma(r)[1] for r in runs)
    total = sum(gamma(r)[0] for r in runs)
    verdict(3, mt == 0, f"gamma_MT = {mt} over {len(runs)} RRI-adaptive runs ({total} colliding grants)")


# -- 4 ----------------------------------------------------------------------

def test_c04_grant_breaking_hurts_pdr():
    runs = fig3()
    base = [pdr_from(r, 100, 500) for r in runs["NoDcc"]]
    gb = [pdr_from(r, 100, 500) for r in runs["DccReactiveGB"]]
    worse = sum(g < b for g, b in zip(gb, base))
    verdict(4, worse >= 4, f"Reactive+GB below NoDcc in {worse}/5 seeds "
                           f"(PDR 100-500 m {np.mean(gb):.3f} vs {np.mean(base):.3f})")


# -- 5 ----------------------------------------------------------------------

def test_c05_colliding_grant_rank():
    runs = cbr20()
    g = {k: avg(v, lambda r: gamma(r)[0]) for k, v in runs.items()}
    crl, lk, drop, ad, re = (g["RriCrLimitAggressive"], g["RriLookup"], g["DropAggressive"],
                             g["DccAdaptive20"], g["DccReactive"])
    ok = crl < lk < drop <= ad < re
    verdict(5, ok, "gamma RriCrLimit {:.1f} < RriLookup {:.1f} < DropAggressive {:.1f} <= "
                   "DccAdaptive {:.1f} < DccReactive {:.1f}".format(crl, lk, drop, ad, re))


# -- 6 ----------------------------------------------------------------------

def test_c06_pdr_gain_at_20pct():
    runs = cbr20()
    crl = avg(runs["RriCrLimitAggressive"], lambda r: pdr_from(r, 200))
    ad = avg(runs["DccAdaptive20"], lambda r: pdr_from(r, 200))
    verdict(6, crl - ad >= 0.03, f"PDR >=200 m RriCrLimit {crl:.3f} vs DccAdaptive {ad:.3f} "
                                 f"(gain {100 * (crl - ad):+.1f} points, need >= +3)")


# -- 7 ----------------------------------------------------------------------

def test_c07_pdr_order_at_60pct():
    runs = cbr60()
    crl = [pdr_from(r, 200) for r in runs["RriCrLimit"]]
    ad = [pdr_from(r, 200) for r in runs["DccAdaptive60"]]
    no = [pdr_from(r, 200) for r in runs["NoDcc"]]
    wins = sum(c > a and c > n for c, a, n in zip(crl, ad, no))
    verdict(7, wins >= 4, f"RriCrLimit above both in {wins}/5 seeds (PDR >=200 m RriCrLimit "
                          f"{np.mean(crl):.3f}, DccAdaptive {np.mean(ad):.3f}, NoDcc {np.mean(no):.3f})")


# -- 8 ----------------------------------------------------------------------

def test_c08_adaptive_convergence():
    base = RunConfig()  # full road density, 20 s
    uncontrolled = mean_cbr(simulate(base, 1))
    cfg = replace(base, controller=replace(base.controller, kind=Kind.ADAPTIVE, adaptive_target=0.68))
    values = [mean_cbr(simulate(cfg, s)) for s in (1, 2)]
    m = float(np.mean(values))
    verdict(8, uncontrolled > 0.68 and 0.63 <= m <= 0.73,
            f"{base.scenario.vehicle_count} vehicles: NoDcc CBR {uncontrolled:.3f}, "
            f"DccAdaptive(0.68) CBR {m:.3f} (seeds {', '.join(f'{v:.3f}' for v in values)})")


# -- 9 ----------------------------------------------------------------------

def test_c09_aggressive_dropping_cbr():
    m = avg(cbr20()["DropAggressive"], mean_cbr)
    verdict(9, 0.15 <= m <= 0.30, f"DropAggressive mean CBR {m:.3f}, need [0.15, 0.30]")


# -- 10 ---------------------------------------------------------------------

AWARENESS_ORDER = ["RriCrLimitAggressive", "DccAdaptive20", "NoDcc", "RriLookup", "DropAggressive",
                   "DccReactive"]


def test_c10_awareness_rank():
    runs = cbr20()
    aw = {k: avg(runs[k], lambda r: np.mean([x[2] for x in r.awareness_rows])) for k in AWARENESS_ORDER}
    ranked = sorted(aw, key=aw.get, reverse=True)
    ok = ranked == AWARENESS_ORDER and aw["RriCrLimitAggressive"] >= 0.95
    verdict(10, ok, "observed " + " > ".join(f"{k} {aw[k]:.3f}" for k in ranked))


# -- 11 ---------------------------------------------------------------------

def test_c11_ipg_order_at_60pct():
    runs = cbr60()
    ipg = {k: avg(v, lambda r: r.ipg.mean()) for k, v in runs.items()}
    no, crl, ad = ipg["NoDcc"], ipg["RriCrLimit"], ipg["DccAdaptive60"]
    verdict(11, no < crl < ad, f"mean IPG NoDcc {no:.1f} < RriCrLimit {crl:.1f} < DccAdaptive {ad:.1f} ms")


# -- 12 ---------------------------------------------------------------------

def test_c12_sci_truthfulness():
    total = wrong = 0
    for runs in (cbr20(), cbr60(), fig3()):
        for rs in runs.values():
            for res in rs:
                opps = defaultdict(list)
                for t, v, g, _ in res.opportunity_log:
                    opps[g].append(t)
                for t, v, g, rri, rrc in res.sci_log:
                    seq = opps[g]
                    i = np.searchsorted(seq, t, side="right")
                    if i < len(seq):
                        total += 1
                        wrong += seq[i] - t != rri
    verdict(12, wrong == 0 and total > 0, f"{total} SCIs replayed, {wrong} announced a wrong RRI")


# -- 13 ---------------------------------------------------------------------

def test_c13_determinism(tmp_path):
    cfg = get_preset("cbr20").configs(desk=True)[4]  # RriLookup
    digests = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        write_run(simulate(cfg.with_seed(DESK_SEEDS[0]), DESK_SEEDS[0], trace_channel=True), out,
                  trace_grants=True, trace_channel=True)
        digests.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    same = digests[0] == digests[1]
    verdict(13, same, f"{len(digests[0])} output files compared byte for byte, "
                      f"{'identical' if same else 'different'}")
