"""Fixed-step closed-loop simulation, logging and energy accounting."""

import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .actuation import input_map
from .contact import ContactParams, contact_forces, propeller_clearance
from .controller import ControllerParams, arm_lateral_reference, control_law, hover_equilibrium, pose_errors
from .dynamics import (
    FullState,
    check_state,
    dynamics_terms,
    end_effector_kinematics,
    external_generalized_force,
    solve_spd,
)
from .params import RobotParams
from .spatial import rot_to_quat, rot_to_rpy, rotation_angle, rpy_rate_matrix, rpy_to_rot
from .trajectory import Trajectory, TrajectoryParams

log = logging.getLogger(__name__)

ENERGY_METRICS = ("induced", "thrust")


class SimulationError(RuntimeError):
    def __init__(self, message, last_state=None, time=None):
        super().__init__(message)
        self.last_state = last_state
        self.time = time


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.002
    duration: float = 10.0
    integrator_order: int = 4
    seed: int = 0
    log_every: int = 1
    energy_metric: str = "induced"
    contact_enabled: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("sim.dt must be positive")
        if not self.duration > 0:
            raise ValueError("sim.duration must be positive")
        if self.integrator_order not in (1, 4):
            raise ValueError("sim.integrator_order must be 1 (Euler) or 4 (RK4)")
        if self.log_every < 1:
            raise ValueError("sim.log_every must be >= 1")
        if self.energy_metric not in ENERGY_METRICS:
            raise ValueError(f"sim.energy_metric must be one of {ENERGY_METRICS}")

    @property
    def n_steps(self):
        return int(round(self.duration / self.dt))


@dataclass
class SimLog:
    t: np.ndarray
    q: np.ndarray
    dq: np.ndarray
    u: np.ndarray
    f_contact: np.ndarray  # (n, 3, 3)
    e_p: np.ndarray
    e_R: np.ndarray
    e_R_angle: np.ndarray
    energy_integrand: np.ndarray
    p_d: np.ndarray
    R_d: np.ndarray
    ref_stance: np.ndarray
    dt: float
    saturation_events: int = 0
    clearance_warnings: int = 0
    completed: bool = True
    failure: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def in_contact(self):
        return np.any(self.f_contact[:, :, 2] > 0.0, axis=1)

    def stance_intervals(self):
        """(start, end) times of contiguous samples with any positive normal force."""
        mask = self.in_contact
        out = []
        start = None
        for k, c in enumerate(mask):
            if c and start is None:
                start = k
            elif not c and start is not None:
                out.append((float(self.t[start]), float(self.t[k - 1])))
                start = None
        if start is not None:
            out.append((float(self.t[start]), float(self.t[-1])))
        return out

    def hop_cycles(self):
        """Planned stances, those that saw ground contact, and planned flights with a contact-free sample.

        Impact bounces inside one planned stance count once. The final flight
        is ignored if the run ends inside it.
        """
        edges = np.flatnonzero(np.diff(self.ref_stance.astype(int))) + 1
        segs = np.split(np.arange(len(self.t)), edges)
        stances = [k for k in segs if self.ref_stance[k[0]]]
        flights = [k for k in segs[1:] if not self.ref_stance[k[0]]]
        if flights and flights[-1][-1] == len(self.t) - 1:
            flights = flights[:-1]
        contact = self.in_contact
        return {
            "planned_stances": len(stances),
            "stances_with_contact": sum(1 for k in stances if contact[k].any()),
            "planned_flights": len(flights),
            "flights_with_liftoff": sum(1 for k in flights if not contact[k].all()),
        }


# -- integration


def _state_derivative(state, u, params, contact, g_frac, contact_enabled, cache=None):
    check_state(state, params)
    if cache is None:
        terms = dynamics_terms(state, params, g_frac)
        G = input_map(state.q, params).G
        kin = end_effector_kinematics(state, params)
    else:
        terms, G, kin = cache
    rhs = G @ u - terms.Cdq - terms.g - terms.damping
    if contact_enabled and contact is not None:
        fc = contact_forces(state, params, contact, kinematics=kin)
        if np.any(fc):
            rhs = rhs + external_generalized_force(state, fc, params, jacobians=kin[2])
    return state.dq, solve_spd(terms.B, rhs)


def step(state: FullState, u, dt, params: RobotParams, contact: ContactParams = None, g_frac=1.0, order=4,
         contact_enabled=True, cache=None):
    """Advance one fixed step with the input held constant."""
    u = np.asarray(u, dtype=float)

    def f(s, c=None):
        return _state_derivative(s, u, params, contact, g_frac, contact_enabled, c)

    if order == 1:
        dq, ddq = f(state, cache)
        new = FullState(state.q + dt * dq, state.dq + dt * ddq)
    else:
        k1q, k1v = f(state, cache)
        k2q, k2v = f(FullState(state.q + 0.5 * dt * k1q, state.dq + 0.5 * dt * k1v))
        k3q, k3v = f(FullState(state.q + 0.5 * dt * k2q, state.dq + 0.5 * dt * k2v))
        k4q, k4v = f(FullState(state.q + dt * k3q, state.dq + dt * k3v))
        new = FullState(
            state.q + dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q),
            state.dq + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v),
        )
    if not (np.all(np.isfinite(new.q)) and np.all(np.isfinite(new.dq))):
        raise SimulationError("non-finite state after integration step", last_state=state)
    check_state(new, params)
    return new


def simulate_open_loop(state, u, params, duration, dt=0.002, g_frac=1.0, contact=None, order=4):
    """Integrate with a constant input; returns the list of states (including the initial one)."""
    states = [state]
    for _ in range(int(round(duration / dt))):
        state = step(state, u, dt, params, contact, g_frac, order, contact_enabled=contact is not None)
        states.append(state)
    return states


# -- energy


def energy_integrand(u16, metric="induced"):
    f = np.clip(np.asarray(u16, dtype=float), 0.0, None)
    if metric == "induced":
        return float(np.sum(f**1.5))
    if metric == "thrust":
        return float(np.sum(f))
    raise ValueError(f"unknown energy metric {metric!r}")


def energy_metric(log: SimLog, reference: SimLog = None):
    """Integral of the rotor power proxy; normalised by ``reference`` when given."""
    E = float(np.sum(log.energy_integrand) * log.dt * log.meta.get("log_every", 1))
    if reference is None:
        return E
    return E / energy_metric(reference)


def hover_energy(params: RobotParams, hold_angle, duration, g_frac=1.0, metric="induced"):
    """Energy of holding the hover-equilibrium input for ``duration``."""
    _, u = hover_equilibrium(params, hold_angle, g_frac=g_frac)
    return energy_integrand(u[:6], metric) * duration


# -- experiments


@dataclass(frozen=True)
class Experiment:
    robot: RobotParams = field(default_factory=RobotParams)
    contact: ContactParams = field(default_factory=ContactParams)
    controller: ControllerParams = field(default_factory=ControllerParams)
    trajectory: TrajectoryParams = field(default_factory=TrajectoryParams)
    sim: SimConfig = field(default_factory=SimConfig)
    g_frac_plant: float = 1.0  # gravity acting on the plant


def initial_state(exp: Experiment, trajectory: Trajectory):
    """Hover equilibrium placed at the reference start, moving with the reference velocity."""
    s0 = trajectory.sample(0.0)
    eq, _ = hover_equilibrium(exp.robot, exp.controller.arm_hold_angle, p=s0.p, g_frac=exp.g_frac_plant)
    eta = rot_to_rpy(s0.R)
    return FullState.from_parts(p=s0.p, eta=eta, q_arm=eq.q_arm, v=s0.v)


def run_closed_loop(exp: Experiment, state0: FullState = None, trajectory: Trajectory = None):
    sim = exp.sim
    params = exp.robot
    traj = trajectory if trajectory is not None else Trajectory(exp.trajectory)
    state = initial_state(exp, traj) if state0 is None else state0
    lateral_ref = arm_lateral_reference(params, exp.controller.arm_hold_angle)
    g_frac = exp.g_frac_plant
    n = sim.n_steps
    rows = {k: [] for k in ("t", "q", "dq", "u", "fc", "ep", "eR", "eRa", "E", "pd", "Rd", "st")}
    saturation = 0
    clearance = 0
    completed, failure = True, ""
    for k in range(n):
        t = k * sim.dt
        sample = traj.sample(t)
        try:
            terms = dynamics_terms(state, params, g_frac)
            G = input_map(state.q, params).G
            kin = end_effector_kinematics(state, params)
            fc = contact_forces(state, params, exp.contact, kinematics=kin) if sim.contact_enabled else np.zeros((3, 3))
            out = control_law(state, sample, exp.controller, params, g_frac, lateral_ref=lateral_ref, terms=terms, G=G,
                              contact_force=fc)
        except Exception as exc:  # noqa: BLE001 - recorded and reported by the caller
            completed, failure = False, f"t={t:.3f}: {exc}"
            log.error("closed loop aborted at t=%.3f: %s", t, exc)
            break
        if out.saturated:
            saturation += out.saturated
            log.debug("thrust saturation at t=%.3f (%d rotors)", t, out.saturated)
        if sim.contact_enabled and propeller_clearance(state, params, exp.contact) < 0:
            clearance += 1
        if k % sim.log_every == 0:
            e_p, _, e_R, _ = pose_errors(state, sample)
            rows["t"].append(t)
            rows["q"].append(state.q)
            rows["dq"].append(state.dq)
            rows["u"].append(out.u)
            rows["fc"].append(fc)
            rows["ep"].append(e_p)
            rows["eR"].append(e_R)
            rows["eRa"].append(rotation_angle(state.R.T @ sample.R))
            rows["E"].append(energy_integrand(out.u[:6], sim.energy_metric))
            rows["pd"].append(sample.p)
            rows["Rd"].append(sample.R)
            rows["st"].append(sample.stance)
        try:
            state = step(state, out.u, sim.dt, params, exp.contact, g_frac, sim.integrator_order,
                         contact_enabled=sim.contact_enabled, cache=(terms, G, kin))
        except Exception as exc:  # noqa: BLE001
            completed, failure = False, f"t={t + sim.dt:.3f}: {exc}"
            log.error("integration aborted at t=%.3f: %s", t + sim.dt, exc)
            break
    if clearance:
        log.warning("propeller below ground level in %d steps", clearance)
    if saturation:
        log.warning("%d thrust saturation events", saturation)
    return SimLog(
        t=np.array(rows["t"]),
        q=np.array(rows["q"]).reshape(-1, 12),
        dq=np.array(rows["dq"]).reshape(-1, 12),
        u=np.array(rows["u"]).reshape(-1, 9),
        f_contact=np.array(rows["fc"]).reshape(-1, 3, 3),
        e_p=np.array(rows["ep"]).reshape(-1, 3),
        e_R=np.array(rows["eR"]).reshape(-1, 3),
        e_R_angle=np.array(rows["eRa"]),
        energy_integrand=np.array(rows["E"]),
        p_d=np.array(rows["pd"]).reshape(-1, 3),
        R_d=np.array(rows["Rd"]).reshape(-1, 3, 3),
        ref_stance=np.array(rows["st"], dtype=bool),
        dt=sim.dt,
        saturation_events=saturation,
        clearance_warnings=clearance,
        completed=completed,
        failure=failure,
        meta={"log_every": sim.log_every, "g_frac": exp.trajectory.g_frac},
    )


def run_jump_experiment(exp: Experiment):
    return run_closed_loop(exp)


def summarize(log_: SimLog):
    ep = np.linalg.norm(log_.e_p, axis=1)
    k_ep = int(np.argmax(ep)) if len(ep) else 0
    k_eR = int(np.argmax(log_.e_R_angle)) if len(ep) else 0
    contact = log_.in_contact
    flight = ~contact
    return {
        "completed": log_.completed,
        "failure": log_.failure,
        "duration": float(log_.t[-1] + log_.dt) if len(log_.t) else 0.0,
        "peak_position_error_m": float(ep[k_ep]) if len(ep) else 0.0,
        "peak_position_error_time": float(log_.t[k_ep]) if len(ep) else 0.0,
        "peak_attitude_error_deg": float(np.rad2deg(log_.e_R_angle[k_eR])) if len(ep) else 0.0,
        "peak_attitude_error_time": float(log_.t[k_eR]) if len(ep) else 0.0,
        "peak_attitude_error_in_stance": bool(contact[k_eR]) if len(ep) else False,
        "max_flight_position_error_m": float(ep[flight].max()) if flight.any() else 0.0,
        "stance_intervals": log_.stance_intervals(),
        "hops": log_.hop_cycles(),
        "energy": energy_metric(log_),
        "saturation_events": log_.saturation_events,
        "clearance_warnings": log_.clearance_warnings,
    }


def gravity_sweep(exp: Experiment, gammas=None, hover_reference=True):
    """Energy of the jump experiment for each gravity fraction of the reference trajectory.

    Failed runs are recorded with NaN energy instead of aborting the sweep.
    Returns a list of dict rows.
    """
    gammas = np.round(np.linspace(0.0, 1.0, 11), 10) if gammas is None else np.asarray(gammas, dtype=float)
    runs = []
    for gamma in gammas:
        traj = replace(exp.trajectory, g_frac=float(gamma))
        try:
            res = run_closed_loop(replace(exp, trajectory=traj))
            ok = res.completed
            E = energy_metric(res) if ok else float("nan")
            err = res.failure
        except Exception as exc:  # noqa: BLE001
            res, ok, E, err = None, False, float("nan"), str(exc)
        runs.append((float(gamma), ok, E, err, res))
    base = next((E for g, ok, E, _, _ in runs if g == 0.0 and ok), None)
    E_hover = None
    if hover_reference:
        E_hover = hover_energy(exp.robot, exp.controller.arm_hold_angle, exp.sim.duration, exp.g_frac_plant,
                               exp.sim.energy_metric)
    table = []
    for gamma, ok, E, err, res in runs:
        table.append(
            {
                "g_frac": gamma,
                "ok": ok,
                "energy": E,
                "energy_norm_translation": E / base if base else float("nan"),
                "energy_norm_hover": E / E_hover if E_hover else float("nan"),
                "error": err,
                "log": res,
            }
        )
    return table


# -- CSV output

LOG_COLUMNS = (
    ["t", "p_x", "p_y", "p_z", "quat_w", "quat_x", "quat_y", "quat_z", "v_x", "v_y", "v_z", "w_x", "w_y", "w_z"]
    + ["q11", "q21", "q13", "q23", "q15", "q25"]
    + ["dq11", "dq21", "dq13", "dq23", "dq15", "dq25"]
    + [f"u{i}" for i in range(1, 7)]
    + ["tau1", "tau2", "tau3"]
    + [f"fc{a}_{c}" for a in (1, 3, 5) for c in "xyz"]
    + ["ep_x", "ep_y", "ep_z", "eR_angle", "energy_integrand"]
)


def log_rows(log_: SimLog):
    for k in range(len(log_.t)):
        q, dq = log_.q[k], log_.dq[k]
        quat = rot_to_quat(rpy_to_rot(q[3:6]))
        omega = rpy_rate_matrix(q[3:6]) @ dq[3:6]
        yield [log_.t[k], *q[0:3], *quat, *dq[0:3], *omega, *q[6:12], *dq[6:12], *log_.u[k],
               *log_.f_contact[k].ravel(), *log_.e_p[k], log_.e_R_angle[k], log_.energy_integrand[k]]


def write_log_csv(log_: SimLog, path):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(LOG_COLUMNS)
        for row in log_rows(log_):
            out.writerow([repr(float(x)) for x in row])


SWEEP_COLUMNS = ("g_frac", "ok", "energy", "energy_norm_translation", "energy_norm_hover", "error")


def write_sweep_csv(table, path):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(SWEEP_COLUMNS)
        for row in table:
            out.writerow([repr(float(row["g_frac"])), int(row["ok"]), repr(float(row["energy"])),
                          repr(float(row["energy_norm_translation"])), repr(float(row["energy_norm_hover"])),
                          row["error"]])
