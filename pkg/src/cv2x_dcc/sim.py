"""Subframe-stepped simulation loop of one run (one configuration, one seed)."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import channel
from .app import CamSource, TxBuffer, draw_phases, enqueue, generate_cam
from .congestion import (CbrMeter, ControllerState, CrMeter, Decision, Kind, control_step,
                         gate_packet)
from .config import RunConfig
from .metrics import (CollidingGrantEvent, FailureCause, IpgAccumulator, PdrAccumulator,
                      awareness, classify_collision)
from .sbsps import (NEVER, SENSING_WINDOW, Action, Grant, SensingWindow, on_rrc_expiry,
                    on_reserved_opportunity, retune_rri, select_resources)
from .scenario import Fleet, build_scenario

_CAUSE_INDEX = {c: i for i, c in enumerate(FailureCause)}


@dataclass
class RunResult:
    config: RunConfig
    seed: int
    n_vehicles: int
    pdr: PdrAccumulator
    ipg: IpgAccumulator
    cbr_rows: list = field(default_factory=list)  # (time_ms, vehicle, cbr, cr)
    awareness_rows: list = field(default_factory=list)  # (time_ms, vehicle, fraction)
    grant_events: list = field(default_factory=list)  # (time, event, owner, grant, detail)
    collisions: list = field(default_factory=list)  # CollidingGrantEvent
    collision_recurrence: dict = field(default_factory=dict)  # (ga, gb) -> joint overlaps
    sci_log: list = field(default_factory=list)  # (time, owner, grant, announced_rri, rrc)
    opportunity_log: list = field(default_factory=list)  # (time, owner, grant, transmitted)
    meter_checks: list = field(default_factory=list)  # (t, v, cbr, cbr_brute, cr, cr_brute)
    gate_log: list = field(default_factory=list)  # (t, v, cbr, cr, decision)
    # (t, v, cbr, cr, reactive_state, t_off, adaptive_rate, rri), only when tracing
    control_trace: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    per_vehicle: dict = field(default_factory=dict)

    @property
    def mechanism(self) -> str:
        return self.config.name


class Simulation:
    def __init__(self, config: RunConfig, seed: int | None = None, trace_channel: bool = False):
        self.cfg = config.validate()
        self.trace_channel = trace_channel
        self.seed = config.scenario.seed if seed is None else seed
        ss = np.random.SeedSequence(self.seed)
        rng_scn, rng_app, self.rng_chan, self.rng_mac = (np.random.default_rng(s) for s in ss.spawn(4))

        scn, radio = config.scenario, config.radio
        self.vehicles = build_scenario(scn, rng_scn)
        self.fleet = Fleet(self.vehicles)
        n = self.n = self.fleet.n
        self.duration = scn.sim_duration
        self.warmup = scn.warmup
        self.sps = config.sps
        self.gb = config.grant_breaking
        self.mcfg = config.metrics
        self.n_sub = radio.num_subchannels
        self.s = radio.subchannels_per_tx

        self.noise_dbm = channel.noise_floor(radio)
        self.noise_mw = float(channel.dbm_to_mw(self.noise_dbm))
        self.sinr_lin = float(channel.dbm_to_mw(radio.sinr_threshold))
        self.busy_mw = float(channel.dbm_to_mw(radio.srssi_threshold))
        self.collision_range = self.mcfg.collision_range or channel.decode_range(radio)

        phases = draw_phases(n, rng_app)
        # controllers sample CBR every control period at a per-vehicle offset
        period = config.controller.control_period
        self.ctrl_offset = rng_app.integers(0, period, size=n)
        self.by_ctrl_phase = defaultdict(list)
        for v in range(n):
            self.by_ctrl_phase[int(self.ctrl_offset[v])].append(v)
        self.sources = [CamSource(v, int(phases[v])) for v in range(n)]
        self.by_phase = defaultdict(list)
        for v in range(n):
            self.by_phase[int(phases[v])].append(v)
        self.buffers = [TxBuffer() for _ in range(n)]
        self.grants: list[Grant | None] = [None] * n
        self.schedule: dict[int, list] = defaultdict(list)
        self.gate_events: dict[int, set] = defaultdict(set)
        self.controllers = [ControllerState.initial(config.controller) for _ in range(n)]

        self.cbr_meter = CbrMeter(self.n_sub, n)
        self.cr_meter = CrMeter(self.n_sub, n)
        self.cbr_now = np.zeros(n)

        # sensing state of every vehicle, one SensingWindow view per vehicle
        self.srssi = np.full((n, SENSING_WINDOW, self.n_sub), self.noise_mw)
        self.sci_time = np.full((n, n), NEVER, dtype=np.int64)
        self.sci_rri = np.zeros((n, n), dtype=np.int64)
        self.sci_rrc = np.zeros((n, n), dtype=np.int64)
        self.sci_start = np.zeros((n, n), dtype=np.int64)
        self.sci_width = np.zeros((n, n), dtype=np.int64)
        self.sci_rsrp = np.full((n, n), -math.inf)
        self.windows = [SensingWindow(self.srssi[v], self.sci_time[v], self.sci_rri[v],
                                      self.sci_rrc[v], self.sci_start[v], self.sci_width[v],
                                      self.sci_rsrp[v]) for v in range(n)]
        self.last_decode = np.full((n, n), NEVER, dtype=np.int64)
        self.own_tx_times: list[list[int]] = [[] for _ in range(n)]

        self._zero_flags = np.zeros((n, self.n_sub), dtype=bool)
        self._zero_usage = np.zeros(n, dtype=np.int16)
        self._noise_block = np.full((n, self.n_sub), self.noise_mw)

        self.result = RunResult(config, self.seed, n,
                                PdrAccumulator(self.mcfg.bin_width, radio.range_cap),
                                IpgAccumulator(n, self.duration))
        self.counters = dict(generated=0, transmitted=0, app_replaced=0, mac_dropped=0,
                             missed=0, breaks=0, expiries=0, keeps=0, selections=0,
                             selections_nf=0, retunes=0, delayed=0)
        self.tx_count = np.zeros(n, dtype=np.int64)
        self.gen_count = np.zeros(n, dtype=np.int64)
        self.replaced_count = np.zeros(n, dtype=np.int64)
        self.dropped_count = np.zeros(n, dtype=np.int64)
        self._grant_seq = 0

    # -- helpers ------------------------------------------------------------

    def _log(self, t, event, v, grant, detail=""):
        self.result.grant_events.append((t, event, v, grant.id if grant is not None else -1, detail))

    def _schedule(self, v: int, grant: Grant) -> None:
        if grant.next_opportunity < self.duration:
            self.schedule[grant.next_opportunity].append((v, grant.id))

    def _select(self, v: int, t: int) -> None:
        ctrl = self.controllers[v]
        rri = ctrl.current_rri if ctrl.kind.is_rri else 100
        grant = select_resources(self.windows[v], rri, t, self.rng_mac, self.sps, owner=v)
        self._grant_seq += 1
        grant.id = self._grant_seq  # ids are per run so outputs do not depend on process history
        self.grants[v] = grant
        self.counters["selections"] += 1
        if grant.selection_context.value == "NoFreeCandidates":
            self.counters["selections_nf"] += 1
        self._log(t, "create", v, grant, f"{grant.next_opportunity}:{grant.subchannels.start}:"
                                        f"{grant.rri}:{grant.rrc}:{grant.selection_context.value}")
        self._schedule(v, grant)

    def _mac_arrival(self, v: int, t: int) -> None:
        """A packet is waiting at the MAC; acquire a grant if none is held."""
        if self.grants[v] is not None or not self.buffers[v]:
            return
        ctrl = self.controllers[v]
        if ctrl.kind.is_rate and ctrl.last_tx_time is not None and t - ctrl.last_tx_time < ctrl.t_off:
            release = int(math.ceil(ctrl.last_tx_time + ctrl.t_off))
            if release < self.duration:
                self.gate_events[release].add(v)
            return
        self._select(v, t)

    def _cr(self, v: int, t: int) -> float:
        return self.cr_meter.cr(v, self.grants[v], t)

    def _cr_brute(self, v: int, t: int) -> float:
        past = sum(1 for x in self.own_tx_times[v] if t - 500 <= x <= t - 1) * self.s
        fut = 0
        g = self.grants[v]
        if g is not None:
            k, opp = 0, g.next_opportunity
            while k < g.rrc and opp <= t + 499:
                if opp >= t:
                    fut += len(g.subchannels)
                k += 1
                opp += g.rri
        return (past + fut) / (1000 * self.n_sub)

    def _end_grant(self, v: int, t: int, grant: Grant, event: str) -> None:
        self.grants[v] = None
        self._log(t, event, v, grant)

    # -- per-subframe phases ------------------------------------------------

    def _control(self, t: int) -> None:
        p = self.cfg.controller
        vs = self.by_ctrl_phase.get(t % p.control_period)
        if not vs or t < p.control_period:
            return
        cbr = self.cbr_meter.cbr
        for v in vs:
            c = float(cbr[v])
            self.cbr_now[v] = c
            due = (t - int(self.ctrl_offset[v])) % p.adaptive_epoch == 0
            ctrl = self.controllers[v]
            control_step(ctrl, c, t, self.s, self.n_sub, due)
            if self.trace_channel:
                self.result.control_trace.append(
                    (t, v, c, self._cr(v, t), ctrl.reactive_state.value, ctrl.t_off,
                     ctrl.adaptive_rate, ctrl.current_rri))

    def _sample(self, t: int) -> None:
        if t < self.warmup:
            return
        cbr = self.cbr_meter.cbr
        res = self.result
        for v in range(self.n):
            res.cbr_rows.append((t, v, float(cbr[v]), self._cr(v, t)))
        if self.mcfg.verify_meters:
            brute = self.cbr_meter.recount()
            for v in range(self.n):
                res.meter_checks.append((t, v, float(cbr[v]), float(brute[v]),
                                         self._cr(v, t), self._cr_brute(v, t)))
        x = self.fleet.positions(t)
        d = self.fleet.distance_matrix(x)
        veh, frac = awareness(self.last_decode, d, t,
                              (self.mcfg.awareness_inner, self.mcfg.awareness_outer),
                              self.mcfg.cam_lifetime)
        res.awareness_rows.extend(zip([t] * veh.size, veh.tolist(), frac.tolist()))

    def _mac(self, t: int):
        """Serve reserved opportunities; return transmitters and all occupants."""
        entries = self.schedule.pop(t, None)
        if not entries:
            return [], []
        tx, occupied = [], []
        res = self.result
        for v, gid in entries:
            g = self.grants[v]
            if g is None or g.id != gid or g.next_opportunity != t:
                continue
            ctrl = self.controllers[v]
            buf = self.buffers[v]
            decision = Decision.TRANSMIT if buf else None
            if buf and ctrl.kind is not Kind.NO_DCC:
                cbr = float(self.cbr_now[v])
                cr = self._cr(v, t) if ctrl.kind.is_drop else 0.0
                gate = gate_packet(ctrl, cbr, cr, t)
                decision = gate.decision
                if ctrl.kind.is_drop:
                    res.gate_log.append((t, v, cbr, cr, decision.value))
            if decision is Decision.TRANSMIT:
                if ctrl.kind.is_rri and ctrl.current_rri != g.rri:
                    retune_rri(g, ctrl.current_rri, t)
                    self.counters["retunes"] += 1
                    self._log(t, "retune", v, g, str(g.rri))
                on_reserved_opportunity(g, True, self.gb, t)
                buf.pop()
                ctrl.last_tx_time = t
                self.tx_count[v] += 1
                self.counters["transmitted"] += 1
                self.own_tx_times[v].append(t)
                if g.rrc <= 0:
                    if on_rrc_expiry(g, self.sps.keep_probability, self.rng_mac, self.sps) is Action.KEEP:
                        self.counters["keeps"] += 1
                        self._log(t, "keep", v, g, str(g.rrc))
                    else:
                        self.counters["expiries"] += 1
                        self._end_grant(v, t, g, "expire")
                sci = g.sci(t)
                res.sci_log.append((t, v, g.id, sci.announced_rri, sci.rrc_snapshot))
                res.opportunity_log.append((t, v, g.id, True))
                tx.append((v, g, sci))
                occupied.append((v, g, True))
                if g.alive:
                    self._schedule(v, g)
                continue

            # reserved opportunity goes unused
            if decision is Decision.DROP:
                buf.pop()
                self.dropped_count[v] += 1
                self.counters["mac_dropped"] += 1
            elif decision is Decision.DELAY:
                self.counters["delayed"] += 1
            res.opportunity_log.append((t, v, g.id, False))
            occupied.append((v, g, False))
            action = on_reserved_opportunity(g, False, self.gb, t)
            if action is Action.BREAK:
                self.counters["breaks"] += 1
                self._end_grant(v, t, g, "break")
                if buf:
                    # a delayed packet re-enters selection once its gate opens
                    self._mac_arrival(v, t)
                continue
            self.counters["missed"] += 1
            self._log(t, "missed", v, g)
            if g.rrc <= 0:
                if on_rrc_expiry(g, self.sps.keep_probability, self.rng_mac, self.sps) is Action.KEEP:
                    self.counters["keeps"] += 1
                    self._log(t, "keep", v, g, str(g.rrc))
                else:
                    self.counters["expiries"] += 1
                    self._end_grant(v, t, g, "expire")
                    if buf:
                        self._mac_arrival(v, t)
                    continue
            self._schedule(v, g)
        return tx, occupied

    def _channel(self, t: int, tx: list) -> None:
        slot = t % SENSING_WINDOW
        n, n_sub, s = self.n, self.n_sub, self.s
        if not tx:
            self.srssi[:, slot, :] = self.noise_mw
            self.cbr_meter.update(self._zero_flags)
            self.cr_meter.push(self._zero_usage)
            return
        radio = self.cfg.radio
        k = len(tx)
        src = np.fromiter((e[0] for e in tx), dtype=np.int64, count=k)
        starts = np.fromiter((e[1].subchannels.start for e in tx), dtype=np.int64, count=k)
        x = self.fleet.positions(t)
        d = self.fleet.distances_from(src, x)  # (k, n)
        p_dbm = radio.tx_power - channel.pathloss(d, radio)
        if radio.shadowing_sigma_los > 0:
            p_dbm = p_dbm + self.rng_chan.normal(0.0, radio.shadowing_sigma_los, size=d.shape)
        p_mw = np.power(10.0, p_dbm / 10.0)
        rows = np.arange(k)
        p_mw[rows, src] = 0.0
        occ = np.zeros((k, n_sub))
        for i in range(s):
            occ[rows, starts + i] = 1.0
        per_sub = p_mw.T @ occ  # (n, n_sub) received power from all transmitters
        srssi = per_sub + self.noise_mw
        self.srssi[:, slot, :] = srssi
        busy = srssi > self.busy_mw
        busy[src] |= occ.astype(bool)
        self.cbr_meter.update(busy)
        usage = self._zero_usage.copy()
        usage[src] = s
        self.cr_meter.push(usage)

        # SINR per (transmission, receiver), interference averaged over the
        # transmission's subchannels
        interf = (per_sub[None, :, :] - p_mw[:, :, None] * occ[:, None, :])
        interf = np.maximum((interf * occ[:, None, :]).sum(axis=2) / s, 0.0)
        sinr_ok = p_mw >= self.sinr_lin * (self.noise_mw + interf)
        transmitting = np.zeros(n, dtype=bool)
        transmitting[src] = True
        in_range = d <= radio.range_cap
        in_range[rows, src] = False
        decoded = sinr_ok & in_range & ~transmitting[None, :]

        if t >= self.warmup:
            clean = p_mw >= self.sinr_lin * self.noise_mw
            cause = np.where(transmitting[None, :], _CAUSE_INDEX[FailureCause.HALF_DUPLEX],
                             np.where(clean, _CAUSE_INDEX[FailureCause.COLLISION],
                                      _CAUSE_INDEX[FailureCause.SINR]))
            self.result.pdr.add(d[in_range], decoded[in_range], cause[in_range])

        ipg_on = t >= self.warmup
        horizon = self.mcfg.ipg_horizon
        for i in range(k):
            v = int(src[i])
            rx = np.flatnonzero(decoded[i])
            if rx.size == 0:
                continue
            prev = self.last_decode[rx, v]
            if ipg_on:
                m = (prev > NEVER) & (d[i, rx] <= horizon)
                self.result.ipg.add(rx[m], v, t - prev[m])
            self.last_decode[rx, v] = t
            sci = tx[i][2]
            self.sci_time[rx, v] = t
            self.sci_rri[rx, v] = sci.announced_rri
            self.sci_rrc[rx, v] = sci.rrc_snapshot
            self.sci_start[rx, v] = sci.reserved_subchannels.start
            self.sci_width[rx, v] = len(sci.reserved_subchannels)
            self.sci_rsrp[rx, v] = p_dbm[i, rx]

        if k > 1 and t >= self.warmup:
            self._colliding_grants(t, tx, d, src)

    def _colliding_grants(self, t, tx, d, src) -> None:
        k = len(tx)
        for i in range(k):
            gi = tx[i][1]
            for j in range(i + 1, k):
                gj = tx[j][1]
                a, b = gi.subchannels, gj.subchannels
                if a.start >= b.stop or b.start >= a.stop:
                    continue
                dist = float(d[i, src[j]])
                if dist > self.collision_range:
                    continue
                key = (gi.id, gj.id) if gi.id < gj.id else (gj.id, gi.id)
                rec = self.result.collision_recurrence
                if key in rec:
                    rec[key] += 1
                    continue
                rec[key] = 1
                cause = classify_collision(gi, gj, t)
                ev = CollidingGrantEvent(key[0], key[1], gi.owner, gj.owner, t, cause, dist)
                self.result.collisions.append(ev)
                self.result.grant_events.append((t, "colliding", gi.owner, gi.id,
                                                 f"{gj.owner}:{gj.id}:{cause.value}"))

    def _generate(self, t: int) -> None:
        for v in self.by_phase.get(t % 100, ()):
            cam = generate_cam(self.sources[v], t)
            self.gen_count[v] += 1
            self.counters["generated"] += 1
            if enqueue(self.buffers[v], cam):
                self.replaced_count[v] += 1
                self.counters["app_replaced"] += 1
            self._mac_arrival(v, t)

    # -- driver -------------------------------------------------------------

    def run(self) -> RunResult:
        sample = self.mcfg.sample_period
        for t in range(self.duration):
            if t and t % sample == 0:
                self._sample(t)
            self._control(t)
            tx, _ = self._mac(t)
            self._channel(t, tx)
            self._generate(t)
            pending = self.gate_events.pop(t, None)
            if pending:
                for v in sorted(pending):
                    self._mac_arrival(v, t)
        res = self.result
        res.counters = dict(self.counters)
        res.per_vehicle = dict(generated=self.gen_count, transmitted=self.tx_count,
                               replaced=self.replaced_count, dropped=self.dropped_count,
                               pending=np.array([int(bool(b)) for b in self.buffers]))
        return res


def simulate(config: RunConfig, seed: int | None = None, trace_channel: bool = False) -> RunResult:
    return Simulation(config, seed, trace_channel).run()
