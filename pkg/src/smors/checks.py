"""Fast invariant battery run by the ``check`` subcommand (no closed-loop simulation)."""

from dataclasses import dataclass

import numpy as np

from .actuation import body_wrench_map, input_map
from .controller import hover_equilibrium
from .dynamics import dynamics_terms, mass_matrix_batch
from .pcc_arm import SegmentConfig, compose, dh_chain, dh_to_arm_frame, embed_planar, pcc_transform
from .sim import Experiment
from .spatial import is_rotation, rpy_to_rot
from .trajectory import Trajectory

RANK_TOL = 1e-9


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_full_actuation(exp: Experiment, n=41):
    """rank([R_B F1; F2]) = 6 for uniform and mixed arm angles in [-pi/2, pi/2]."""
    angles = np.linspace(-np.pi / 2, np.pi / 2, n)
    configs = [np.full(6, a) for a in angles]
    rng = np.random.default_rng(exp.sim.seed)
    configs += list(rng.uniform(-np.pi / 2, np.pi / 2, (50, 6)))
    worst_rank, worst_sigma, worst_q = 6, np.inf, None
    for q_arm in configs:
        W = body_wrench_map(q_arm, np.eye(3), exp.robot)
        s = np.linalg.svd(W, compute_uv=False)
        rank = int(np.sum(s > RANK_TOL * s[0]))
        if rank < worst_rank or (rank == worst_rank and s[-1] < worst_sigma):
            worst_rank, worst_sigma, worst_q = rank, s[-1], q_arm
    ok = worst_rank == 6 and worst_sigma > RANK_TOL
    detail = f"min rank {worst_rank}, min singular value {worst_sigma:.3e}"
    if not ok:
        detail += f" at arm angles {np.round(worst_q, 3).tolist()}"
    return CheckResult("full_actuation", ok, detail)


def _random_states(exp: Experiment, n):
    rng = np.random.default_rng(exp.sim.seed)
    q = np.zeros((n, 12))
    q[:, 0:3] = rng.uniform(-1.0, 1.0, (n, 3))
    q[:, 3:6] = rng.uniform(-0.6, 0.6, (n, 3))
    q[:, 6:12] = rng.uniform(-np.pi / 2, np.pi / 2, (n, 6))
    return q


def check_inertia(exp: Experiment, n=200):
    """B(q) symmetric, positive definite, with no coupling between different arms."""
    B = mass_matrix_batch(_random_states(exp, n), exp.robot)
    asym = float(np.max(np.abs(B - np.swapaxes(B, -1, -2))))
    eig_min = float(np.min(np.linalg.eigvalsh(B)))
    cross = 0.0
    for a in range(3):
        for b in range(3):
            if a != b:
                block = B[:, 6 + 2 * a : 8 + 2 * a, 6 + 2 * b : 8 + 2 * b]
                cross = max(cross, float(np.max(np.abs(block))))
    ok = asym < 1e-10 and eig_min > 0 and cross == 0.0
    return CheckResult("inertia_spd", ok, f"asymmetry {asym:.1e}, min eigenvalue {eig_min:.3e}, arm coupling {cross:.1e}")


def check_pcc_dh(exp: Experiment):
    """Arc endpoint and augmented DH chain endpoint coincide."""
    err = 0.0
    for L in (exp.robot.arm.L1, exp.robot.arm.L2):
        for q in np.linspace(-np.pi / 2, np.pi / 2, 25):
            seg = SegmentConfig(q, L)
            T_dh = dh_to_arm_frame(compose(dh_chain(seg)))
            T_pcc = embed_planar(pcc_transform(seg))
            err = max(err, float(np.max(np.abs(T_dh - T_pcc))))
    return CheckResult("pcc_dh_coincidence", err < 1e-10, f"max endpoint deviation {err:.1e}")


def check_trajectory(exp: Experiment, h=1e-5):
    """Central differences of p_d reproduce v_d and a_d; R_d stays a proper rotation."""
    traj = Trajectory(exp.trajectory)
    T = min(exp.sim.duration, 4.0 * traj.params.hop_period if traj.params.hopping else 2.0)
    ts = np.linspace(0.013, T, 97)
    err_v, err_a, err_R = 0.0, 0.0, 0.0
    for t in ts:
        s, sm, sp = traj.sample(t), traj.sample(t - h), traj.sample(t + h)
        if sm.stance != sp.stance or sm.stance != s.stance:
            continue  # straddles a touchdown or lift-off, where a_d jumps
        v_fd = (sp.p - sm.p) / (2 * h)
        a_fd = (sp.v - sm.v) / (2 * h)
        scale_v = max(np.linalg.norm(s.v), 1.0)
        scale_a = max(np.linalg.norm(s.a), 1.0)
        err_v = max(err_v, float(np.linalg.norm(v_fd - s.v)) / scale_v)
        err_a = max(err_a, float(np.linalg.norm(a_fd - s.a)) / scale_a)
        err_R = max(err_R, float(np.max(np.abs(s.R.T @ s.R - np.eye(3)))), abs(np.linalg.det(s.R) - 1.0))
    ok = err_v < 1e-6 and err_a < 1e-6 and err_R < 1e-12
    return CheckResult("trajectory_derivatives", ok,
                       f"rel. velocity error {err_v:.1e}, rel. acceleration error {err_a:.1e}, R_d error {err_R:.1e}")


def check_hover(exp: Experiment):
    """The hover equilibrium input balances the gravity load exactly."""
    state, u = hover_equilibrium(exp.robot, exp.controller.arm_hold_angle, g_frac=exp.g_frac_plant)
    g = dynamics_terms(state, exp.robot, exp.g_frac_plant).g
    res = float(np.linalg.norm(input_map(state.q, exp.robot).G @ u - g))
    feasible = bool(np.all(u[:6] >= 0) and np.all(u[:6] <= exp.robot.propeller.f_max))
    return CheckResult("hover_equilibrium", res < 1e-6 and feasible,
                       f"residual {res:.1e}, thrusts {np.round(u[:6], 3).tolist()}")


def check_rotation_helpers(exp: Experiment):
    rng = np.random.default_rng(exp.sim.seed)
    ok = all(is_rotation(rpy_to_rot(eta)) for eta in rng.uniform(-np.pi, np.pi, (50, 3)))
    return CheckResult("rotation_helpers", ok, "rpy_to_rot yields proper rotations")


BATTERY = (check_pcc_dh, check_full_actuation, check_inertia, check_trajectory, check_hover, check_rotation_helpers)


def run_checks(exp: Experiment):
    out = []
    for fn in BATTERY:
        try:
            out.append(fn(exp))
        except Exception as exc:  # noqa: BLE001 - a crashing check is a failed check
            out.append(CheckResult(fn.__name__.removeprefix("check_"), False, f"error: {exc}"))
    return out


def format_table(results):
    width = max(len(r.name) for r in results)
    return "\n".join(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}" for r in results)

