"""Closed-loop scenario runner, trace capture and passive/active comparison.

One scenario is one sequential 1 kHz loop. Per tick the runner samples
the road, integrates the plant one RK4 step under the torque computed at
the previous tick (the one-tick computation delay is explicit), reads the
measurements, updates the reference trajectory (dispatching a blend event
when the deadband is exceeded), feeds the estimator, refreshes the gains
when due, steps the observer, and finally computes the torque for the
next tick.

Active runs may start with an identification phase: the road clock is
held until the controller engages, and a seeded band-limited torque is
injected on top of the holding torque while the estimator adapts. Metrics
and comparisons are computed on the post-engagement window, so the
passive and active runs see the identical road segment.
"""

from __future__ import annotations

import math
import os
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.optimize

from . import lq, ride
from .config import as_bool, as_float, as_int, as_str, load_physical_params, read_kv
from .estimator import GradientEstimator, band_limited_torque
from .observer import MultiObserver
from .plant import (
    PhysicalParams,
    PlantState,
    equilibrium,
    eval_dynamics,
    linearize,
    rk4_step,
)
from .roads import RoadProfile, load_road_table
from .trajectory import ReferenceCalculator, TrajectoryConfig

MODES = ("active", "passive", "identification")

#: trace column names; units are part of the name
COLUMNS = (
    "t_s",
    "road_m",
    "arm_angle_rad",
    "body_heave_m",
    "body_accel_mps2",
    "reference_rad",
    "ref_event",
    "torque_Nm",
    "theta_crc32",
    "adapt_eps",
    "adapt_m_sq",
    "accel_filtered_mps2",
    "xhat_0",
    "xhat_1",
    "xhat_2",
    "xhat_3",
    "x1_0",
    "x2_0",
    "x3_0",
    "envelope_flag",
    "gain_refresh",
)

CONTROLLER_COLUMNS = (
    "reference_rad",
    "ref_event",
    "torque_Nm",
    "theta_crc32",
    "adapt_eps",
    "adapt_m_sq",
    "accel_filtered_mps2",
    "xhat_0",
    "xhat_1",
    "xhat_2",
    "xhat_3",
    "x1_0",
    "x2_0",
    "x3_0",
    "gain_refresh",
)


class ScenarioAbort(RuntimeError):
    """Plant left the arm-angle envelope; carries the flushed partial trace."""

    def __init__(self, message: str, tick: int, trace: "SimTrace"):
        super().__init__(f"{message} (tick {tick})")
        self.tick = tick
        self.trace = trace


@dataclass
class SimTrace:
    """Uniform-grid per-tick record of one run."""

    data: dict[str, np.ndarray]
    engage_tick: int = 0

    def __len__(self) -> int:
        return len(self.data["t_s"])

    def column(self, name: str) -> np.ndarray:
        return self.data[name]

    def validate(self) -> None:
        n = len(self)
        if n == 0:
            raise ValueError("empty trace")
        for name in COLUMNS:
            col = self.data[name]
            if len(col) != n:
                raise ValueError(f"column {name} has length {len(col)} != {n}")
            if not np.all(np.isfinite(col)):
                raise ValueError(f"column {name} contains non-finite values")
        t = self.data["t_s"]
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("time grid must strictly increase")


def export_csv(trace: SimTrace, path) -> None:
    """Write the trace as RFC-4180-style CSV, floats at 17 significant digits."""
    if len(trace) == 0:
        raise ValueError("refusing to export an empty trace")
    cols = [trace.data[name] for name in COLUMNS]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(COLUMNS) + "\n")
        for i in range(len(trace)):
            fh.write(",".join(f"{col[i]:.17g}" for col in cols) + "\n")


def import_csv(path) -> SimTrace:
    """Read back an exported trace (bit-exact round trip)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if not rows:
        raise ValueError(f"no data rows in {path}")
    arr = np.array([[float(v) for v in row] for row in rows])
    return SimTrace(data={name: arr[:, j].copy() for j, name in enumerate(header)})


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one run needs; loadable from a flat key = value file."""

    road: RoadProfile = field(default_factory=RoadProfile)
    duration: float = 8.0
    dt: float = 1e-3
    mode: str = "active"
    params: PhysicalParams = field(default_factory=PhysicalParams)
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    trajectory_profile: str = "front"   # which gain/initial-reference pair
    observer_r_mid: float | None = None  # default: midpoint of the range
    q1: float = 100.0
    r_weight: float = 1.0
    torque_limit: float | None = None
    est_gamma: float = 1.0
    est_lambda0: float = 20.0
    est_box_factor: float = 3.0
    adapt_during_control: bool = True
    id_duration: float = 5.0
    id_band: tuple[float, float] = (0.5, 15.0)
    id_fraction: float = 0.05
    id_floor: float = 50.0
    refresh_ticks: int = 100
    refresh_rel: float = 0.01
    noise_std: float = 0.0
    envelope_margin: float = 0.02
    seed: int = 0

    def validate(self) -> None:
        if self.duration <= 0.0:
            raise ValueError("duration must be positive")
        if self.dt != 1e-3:
            raise ValueError("dt is fixed at 1e-3 s (1 kHz control tick)")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.trajectory_profile not in ("front", "mid"):
            raise ValueError("trajectory_profile must be 'front' or 'mid'")
        self.params.validate()
        self.trajectory.validate()

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        kv = read_kv(path)
        base = Path(path).parent

        kind = as_str(kv, "road_kind", "bump")
        if kind == "custom":
            road = load_road_table(base / as_str(kv, "road_table"))
            road = replace(road, time_scale=as_float(kv, "road_time_scale", 1.0))
        else:
            road = RoadProfile(
                kind=kind,
                peak=as_float(kv, "road_h", 0.04),
                time_scale=as_float(kv, "road_time_scale", 1.0),
            )

        vehicle = as_str(kv, "vehicle", "default")
        params = load_physical_params(None if vehicle == "default" else base / vehicle)

        traj = TrajectoryConfig(
            cutoff_time_constant=as_float(kv, "traj_tau_f", 0.1),
            gain_front=as_float(kv, "traj_k1", 1.0),
            gain_mid=as_float(kv, "traj_k2", 1.0),
            initial_ref_front=as_float(kv, "traj_r_i_front", 0.30),
            initial_ref_mid=as_float(kv, "traj_r_i_mid", 0.30),
            ref_min=as_float(kv, "traj_r_min", 0.15),
            ref_max=as_float(kv, "traj_r_max", 0.45),
            accel_scale=as_float(kv, "traj_a_sat", 1.5),
            deadband=as_float(kv, "traj_deadband", 0.005),
        )

        limit = as_float(kv, "torque_limit", 0.0)
        cfg = cls(
            road=road,
            duration=as_float(kv, "duration", 8.0),
            dt=as_float(kv, "dt", 1e-3),
            mode=as_str(kv, "mode", "active"),
            params=params,
            trajectory=traj,
            trajectory_profile=as_str(kv, "trajectory_profile", "front"),
            observer_r_mid=(as_float(kv, "observer_r_mid")
                            if "observer_r_mid" in kv else None),
            q1=as_float(kv, "lq_q1", 100.0),
            r_weight=as_float(kv, "lq_r", 1.0),
            torque_limit=limit if limit > 0.0 else None,
            est_gamma=as_float(kv, "est_gamma", 1.0),
            est_lambda0=as_float(kv, "est_lambda0", 20.0),
            est_box_factor=as_float(kv, "est_box_factor", 3.0),
            adapt_during_control=as_bool(kv, "adapt_during_control", True),
            id_duration=as_float(kv, "id_duration", 5.0),
            id_band=(as_float(kv, "id_band_low", 0.5), as_float(kv, "id_band_high", 15.0)),
            id_fraction=as_float(kv, "id_fraction", 0.05),
            id_floor=as_float(kv, "id_floor", 50.0),
            refresh_ticks=as_int(kv, "refresh_ticks", 100),
            refresh_rel=as_float(kv, "refresh_rel", 0.01),
            noise_std=as_float(kv, "noise_std", 0.0),
            envelope_margin=as_float(kv, "envelope_margin", 0.02),
            seed=as_int(kv, "seed", 0),
        )
        cfg.validate()
        return cfg


def passive_equilibrium(params: PhysicalParams) -> tuple[PlantState, float]:
    """Rest configuration with zero actuator torque (passive baseline start)."""

    def holding(a: float) -> float:
        return equilibrium(params, a)[1]

    lo, hi = params.arm_angle_min, params.arm_angle_max
    f_lo, f_hi = holding(lo), holding(hi)
    if f_lo * f_hi > 0.0:
        raise ValueError("no zero-torque equilibrium inside the arm-angle range")
    a0 = scipy.optimize.brentq(holding, lo, hi, xtol=1e-12)
    state, tau = equilibrium(params, a0)
    return state, tau


def _theta_crc(theta: np.ndarray) -> float:
    return float(zlib.crc32(theta.tobytes()))


def run_scenario(cfg: ScenarioConfig) -> SimTrace:
    """Run one scenario; returns the completed trace.

    Raises ScenarioAbort (with the partial trace flushed into the
    exception) when the arm angle leaves the configured envelope by more
    than ``envelope_margin``.
    """
    cfg.validate()
    p = cfg.params
    dt = cfg.dt

    identify_only = cfg.mode == "identification"
    active = cfg.mode == "active" or identify_only
    id_ticks = int(round(cfg.id_duration / dt)) if active else 0
    if identify_only:
        # the whole run is the identification phase
        id_ticks = int(round(cfg.duration / dt))
        n_ticks = id_ticks
    else:
        n_ticks = id_ticks + int(round(cfg.duration / dt))
    t_engage = id_ticks * dt

    def road_sample(t: float) -> tuple[float, float]:
        # road clock starts at controller engagement
        if t <= t_engage:
            return 0.0, 0.0
        return cfg.road.sample(t - t_engage)

    # separate stream from the identification torque (which uses cfg.seed)
    rng = np.random.default_rng(cfg.seed + 1000003)

    if active:
        calc = ReferenceCalculator(cfg.trajectory, cfg.trajectory_profile == "mid")
        r0 = calc.r_initial
        eq0, tau0 = equilibrium(p, r0)
        tf0 = linearize(p, eq0, tau0)
        model = lq.realize(tf0)
        n = model.order
        weights = lq.LqWeights(np.diag([cfg.q1] + [0.0] * (n - 1)), cfg.r_weight)
        pole_cap = 0.45 / dt  # keep the Euler-stepped observer stable
        gains = lq.synthesize(model, weights, pole_cap=pole_cap)
        est = GradientEstimator.from_plant(
            tf0, dt, lambda0=cfg.est_lambda0, gamma=cfg.est_gamma,
            box_factor=cfg.est_box_factor,
        )
        theta_synth = est.theta.copy()
        r_mid = cfg.observer_r_mid
        if r_mid is None:
            r_mid = 0.5 * (cfg.trajectory.ref_min + cfg.trajectory.ref_max)
        obs = MultiObserver(n, cfg.trajectory.ref_min, r_mid,
                            cfg.trajectory.ref_max, r0)
        state = eq0
        u = tau0
        u_ff = tau0
        amp = max(cfg.id_fraction * abs(tau0), cfg.id_floor)
        excitation = (
            band_limited_torque(id_ticks, dt, amp, cfg.id_band, cfg.seed)
            if id_ticks > 0 else np.zeros(0)
        )
        a_op, tau_op = eq0.arm_angle, tau0  # estimator operating point
    else:
        state, _ = passive_equilibrium(p)
        u = 0.0
        calc = est = obs = gains = model = None
        r0 = 0.0

    cols = {name: np.zeros(n_ticks + 1) for name in COLUMNS}

    def log(i: int, t: float, st: PlantState, u_i: float, accel: float,
            ref_event: float, refreshed: float) -> None:
        cols["t_s"][i] = t
        cols["road_m"][i] = road_sample(t)[0]
        cols["arm_angle_rad"][i] = st.arm_angle
        cols["body_heave_m"][i] = st.body_heave
        cols["body_accel_mps2"][i] = accel
        cols["torque_Nm"][i] = u_i
        cols["ref_event"][i] = ref_event
        cols["gain_refresh"][i] = refreshed
        touched = st.arm_angle <= p.arm_angle_min or st.arm_angle >= p.arm_angle_max
        cols["envelope_flag"][i] = 1.0 if touched else 0.0
        if active:
            cols["reference_rad"][i] = obs.r
            cols["theta_crc32"][i] = _theta_crc(est.theta)
            cols["adapt_eps"][i] = est.last_eps
            cols["adapt_m_sq"][i] = est.last_m_sq
            cols["accel_filtered_mps2"][i] = calc.filter_state
            for k in range(4):
                cols[f"xhat_{k}"][i] = obs.xhat[k]
            cols["x1_0"][i] = obs.x1[0]
            cols["x2_0"][i] = obs.x2[0]
            cols["x3_0"][i] = obs.x3[0]

    accel0 = eval_dynamics(state, u, *road_sample(0.0), p).body_accel
    log(0, 0.0, state, u, accel0, 0.0, 0.0)

    trace = SimTrace(data=cols, engage_tick=id_ticks)
    ticks_since_synth = 0

    for i in range(1, n_ticks + 1):
        t_prev = (i - 1) * dt
        t = i * dt
        state = rk4_step(state, u, road_sample, t_prev, dt, p)

        if not (p.arm_angle_min - cfg.envelope_margin
                <= state.arm_angle
                <= p.arm_angle_max + cfg.envelope_margin):
            partial = SimTrace(
                data={k: v[:i].copy() for k, v in cols.items()},
                engage_tick=id_ticks,
            )
            raise ScenarioAbort(
                f"arm angle {state.arm_angle:.4f} left the envelope "
                f"[{p.arm_angle_min}, {p.arm_angle_max}]", i, partial)

        y = state.arm_angle
        body_accel = eval_dynamics(state, u, *road_sample(t), p).body_accel
        if cfg.noise_std > 0.0:
            y += rng.normal(0.0, cfg.noise_std)
            body_accel += rng.normal(0.0, cfg.noise_std)

        ref_event = 0.0
        refreshed = 0.0
        if active:
            in_id_phase = i <= id_ticks
            engaged = not in_id_phase and not identify_only

            if engaged:
                _, dispatched = calc.update(body_accel, y, dt)
                if dispatched is not None:
                    eq_r, u_ff = equilibrium(p, dispatched)
                    obs.on_reference_change(dispatched)
                    ref_event = 1.0

            z, phi = est.regress(u - tau_op, y - a_op, dt)
            if in_id_phase or cfg.adapt_during_control:
                est.adapt(z, phi)

            ticks_since_synth += 1
            drift = np.linalg.norm(est.theta - theta_synth)
            if (ticks_since_synth >= cfg.refresh_ticks
                    or drift > cfg.refresh_rel * np.linalg.norm(theta_synth)):
                try:
                    model_new = lq.realize(est.to_plant())
                    gains_new = lq.synthesize(model_new, weights, pole_cap=pole_cap)
                except (lq.CareBoundaryError, lq.ConditioningError,
                        lq.PlacementError, ValueError):
                    pass  # keep the previous gains; the estimate may recover
                else:
                    model, gains = model_new, gains_new
                    refreshed = 1.0
                theta_synth = est.theta.copy()
                ticks_since_synth = 0

            obs.step(y, gains, model, dt)

            if in_id_phase:
                u = tau0 + (excitation[i - 1] if i - 1 < excitation.size else 0.0)
            elif identify_only:
                u = tau0
            else:
                u = u_ff + lq.control_torque(gains.K_c, obs.xhat, cfg.torque_limit)
        else:
            u = 0.0

        log(i, t, state, u, body_accel, ref_event, refreshed)

    trace.validate()
    return trace


@dataclass(frozen=True)
class ComparisonReport:
    """Passive-vs-active ride metrics on the identical road segment."""

    passive: ride.RideMetrics
    active: ride.RideMetrics
    reduction: ride.ReductionReport

    def to_text(self) -> str:
        rows = [
            ("", "passive", "active"),
            ("weighted RMS accel [m/s^2]",
             f"{self.passive.a_rms:.6f}", f"{self.active.a_rms:.6f}"),
            ("peak weighted accel [m/s^2]",
             f"{self.passive.peak:.6f}", f"{self.active.peak:.6f}"),
            ("comfort labels",
             "; ".join(sorted(self.passive.labels)) or "-",
             "; ".join(sorted(self.active.labels)) or "-"),
        ]
        width0 = max(len(r[0]) for r in rows)
        width1 = max(len(r[1]) for r in rows)
        lines = [f"{r[0]:<{width0}}  {r[1]:<{width1}}  {r[2]}" for r in rows]
        lines.append("")
        lines.append(f"RMS reduction:  {self.reduction.rms_percent:.2f} %")
        lines.append(f"peak reduction: {self.reduction.peak_percent:.2f} %")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        header = ("metric,passive,active,reduction_percent\n")
        return header + (
            f"weighted_rms_mps2,{self.passive.a_rms:.17g},"
            f"{self.active.a_rms:.17g},{self.reduction.rms_percent:.17g}\n"
            f"peak_weighted_mps2,{self.passive.peak:.17g},"
            f"{self.active.peak:.17g},{self.reduction.peak_percent:.17g}\n"
        )


def post_engagement_metrics(
    trace: SimTrace, dt: float, filt: ride.WeightingFilter | None = None
) -> ride.RideMetrics:
    """Ride metrics of the body acceleration after controller engagement."""
    accel = trace.column("body_accel_mps2")[trace.engage_tick:]
    return ride.RideMetrics.from_series(accel, dt, filt)


def run_comparison(cfg: ScenarioConfig) -> tuple[ComparisonReport, SimTrace, SimTrace]:
    """Run the passive and active variants on the identical road and compare."""
    active_cfg = replace(cfg, mode="active")
    passive_cfg = replace(cfg, mode="passive")
    active_trace = run_scenario(active_cfg)
    # the passive run has no identification phase: its road clock starts at
    # t = 0, so its full window covers the same road segment the active run
    # sees after engagement
    passive_trace = run_scenario(passive_cfg)

    filt = ride.default_weighting()
    m_passive = post_engagement_metrics(passive_trace, cfg.dt, filt)
    m_active = post_engagement_metrics(active_trace, cfg.dt, filt)
    report = ComparisonReport(
        passive=m_passive,
        active=m_active,
        reduction=ride.percent_reduction(m_passive, m_active),
    )
    return report, passive_trace, active_trace
