"""Geometric pose + arm-shape controller with model-based allocation.

Virtual accelerations for the body pose and for each arm's lateral
end-effector coordinate are stacked into a 12-vector of desired generalized
accelerations, pushed through the inverse dynamics and allocated to the nine
inputs with the Moore-Penrose inverse of the input map. When the exact
solution needs thrusts outside [0, f_max], a bounded least-squares allocation
takes over, trading position accuracy for attitude.
"""

import logging
from functools import lru_cache
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import least_squares, lsq_linear

from .actuation import input_map
from .dynamics import FullState, dynamics_terms, external_generalized_force
from .params import RobotParams
from .pcc_arm import arm_planar_points, lateral_position
from .spatial import rpy_rate_matrix, rpy_rate_matrix_dot, vee

log = logging.getLogger(__name__)

ARM_LIFT_DAMPING = 1e-6
RANK_TOL = 1e-8
ALLOCATIONS = ("task_space", "inertia_weighted", "plain")
# "passive_arms": while a tip touches the ground the tendons hold their hover torque, the arms
# act as passive springs and the thrusts account for the measured contact wrench.
# "ignore": the same law in contact as in flight.
CONTACT_HANDLING = ("passive_arms", "ignore")


class AllocationError(RuntimeError):
    pass


def _diag3(value):
    arr = np.broadcast_to(np.asarray(value, dtype=float), (3,))
    return tuple(float(x) for x in arr)


@dataclass(frozen=True)
class Gains:
    k_p: tuple = (25.0, 25.0, 200.0)
    k_v: tuple = (10.0, 10.0, 28.0)
    k_R: tuple = (36.0, 36.0, 36.0)
    k_w: tuple = (12.0, 12.0, 12.0)
    k_p_arm: float = 120.0
    k_d_arm: float = 12.0
    k_d_null: float = 0.0  # damping on the arm motion that leaves the lateral tip coordinate unchanged

    def __post_init__(self):
        for name in ("k_p", "k_v", "k_R", "k_w"):
            vals = _diag3(getattr(self, name))
            if min(vals) <= 0:
                raise ValueError(f"gains.{name} must be positive")
            object.__setattr__(self, name, vals)
        if self.k_p_arm <= 0 or self.k_d_arm <= 0:
            raise ValueError("arm gains must be positive")
        if self.k_d_null < 0:
            raise ValueError("gains.k_d_null must be non-negative")


@dataclass(frozen=True)
class ControllerParams:
    gains: Gains = field(default_factory=Gains)
    arm_hold_angle: float = 0.5  # both segments; defines the held lateral tip position
    contact_handling: str = "passive_arms"
    allocation: str = "task_space"
    # acceleration-error weights (position, attitude, arms) used once thrusts hit their bounds
    saturation_weights: tuple = (1.0, 4.0, 1.0)
    contact_feedforward: float = 0.0  # share of the measured contact wrench fed into the allocation

    def __post_init__(self):
        if self.contact_handling not in CONTACT_HANDLING:
            raise ValueError(f"controller.contact_handling must be one of {CONTACT_HANDLING}")
        if self.allocation not in ALLOCATIONS:
            raise ValueError(f"controller.allocation must be one of {ALLOCATIONS}")
        w = tuple(float(x) for x in self.saturation_weights)
        if len(w) != 3 or min(w) <= 0:
            raise ValueError("controller.saturation_weights must be three positive numbers")
        object.__setattr__(self, "saturation_weights", w)
        if not 0.0 <= self.contact_feedforward <= 1.0:
            raise ValueError("controller.contact_feedforward must lie in [0, 1]")


@dataclass
class ControlOutput:
    u: np.ndarray
    u_unsaturated: np.ndarray
    saturated: int
    residual: float
    sigma_min: float
    nu: np.ndarray


def pose_errors(state: FullState, sample):
    R_B, R_d = state.R, sample.R
    e_p = sample.p - state.p
    e_v = sample.v - state.v
    e_R = 0.5 * vee(R_B.T @ R_d - R_d.T @ R_B)
    e_w = R_B.T @ R_d @ sample.omega - state.omega
    return e_p, e_v, e_R, e_w


def attitude_error(R_B, R_d):
    return 0.5 * vee(R_B.T @ R_d - R_d.T @ R_B)


def virtual_accelerations(errors, sample, gains: Gains):
    e_p, e_v, e_R, e_w = errors
    nu_p = np.asarray(gains.k_p) * e_p + np.asarray(gains.k_v) * e_v + sample.a
    nu_R = np.asarray(gains.k_R) * e_R + np.asarray(gains.k_w) * e_w + sample.domega
    return nu_p, nu_R


def arm_lateral_reference(params: RobotParams, hold_angle):
    w, _ = lateral_position(hold_angle, hold_angle, params.arm)
    return w


def arm_errors(state: FullState, lateral_ref, gains: Gains, params: RobotParams, lateral_rate_ref=None):
    """Scalar PD command on each arm's lateral end-effector coordinate, plus the task gradients."""
    lateral_ref = np.broadcast_to(np.asarray(lateral_ref, dtype=float), (3,))
    rate_ref = np.zeros(3) if lateral_rate_ref is None else np.asarray(lateral_rate_ref, dtype=float)
    qa = state.q_arm.reshape(3, 2)
    pos, dpos = arm_planar_points(qa[:, 0], qa[:, 1], params.arm)
    w = pos[:, 3, 1]
    grads = dpos[:, 3, 1, :]
    wdot = np.einsum("ka,ka->k", grads, state.dq_arm.reshape(3, 2))
    nu = gains.k_p_arm * (lateral_ref - w) + gains.k_d_arm * (rate_ref - wdot)
    return nu, grads


def assemble_nu(state: FullState, nu_p, nu_R, nu_arm, arm_grads, k_d_null=0.0):
    """Desired generalized accelerations (12) from the task-space commands."""
    eta, deta = state.eta, state.dq[3:6]
    T = rpy_rate_matrix(eta)
    dT = rpy_rate_matrix_dot(eta, deta)
    nu = np.zeros(12)
    nu[0:3] = nu_p
    nu[3:6] = np.linalg.solve(T, nu_R - dT @ deta)
    for k in range(3):
        g = arm_grads[k]
        gg = g @ g + ARM_LIFT_DAMPING
        dqa = state.dq_arm[2 * k : 2 * k + 2]
        null_rate = dqa - g * (g @ dqa) / gg
        nu[6 + 2 * k : 8 + 2 * k] = g * nu_arm[k] / gg - k_d_null * null_rate
    return nu


def allocate(G, wrench, B=None):
    """Least-squares inputs through the Moore-Penrose inverse; raises if G lost rank.

    With ``B`` given, residuals are measured in the inverse-inertia metric
    (i.e. as acceleration errors): u = (L^-1 G)^+ L^-1 w with B = L L^T.
    """
    if B is not None:
        L = np.linalg.cholesky(B)
        G = solve_triangular(L, G, lower=True)
        wrench = solve_triangular(L, wrench, lower=True)
    U, s, Vt = np.linalg.svd(G, full_matrices=False)
    if s[-1] < RANK_TOL * max(s[0], 1.0):
        log.error("allocation degenerate: min singular value %.3e", s[-1])
        raise AllocationError(f"input map rank deficient (sigma_min = {s[-1]:.3e})")
    u = Vt.T @ ((U.T @ wrench) / s)
    return u, float(s[-1])


def bounded_allocation(A, wrench, B, f_max, weights):
    """Thrusts within [0, f_max] minimizing the weighted generalized-acceleration error.

    The error of unknowns x is B^-1 (A x - wrench); rows are scaled by the
    position, attitude and arm weights so that attitude can take priority
    when the thrust bounds make the exact solution unreachable.
    """
    S = np.repeat(np.asarray(weights, dtype=float), [3, 3, 6])
    M = S[:, None] * np.linalg.inv(B)
    n = A.shape[1]
    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    lower[:6], upper[:6] = 0.0, f_max
    res = lsq_linear(M @ A, M @ wrench, bounds=(lower, upper), method="bvls")
    return res.x


def arm_null_directions(arm_grads):
    """(12, 3) generalized directions that leave every lateral tip coordinate unchanged."""
    N = np.zeros((12, 3))
    for k, g in enumerate(arm_grads):
        n = np.array([-g[1], g[0]])
        N[6 + 2 * k : 8 + 2 * k, k] = n / np.linalg.norm(n)
    return N


def control_law(state: FullState, sample, ctrl: ControllerParams, params: RobotParams, g_frac=1.0,
                lateral_ref=None, terms=None, G=None, contact_force=None):
    """Thrusts and tendon torques u = G^+ (B nu + C dq + g), re-allocated within [0, f_max] if needed.

    With ``passive_arms`` a share ``contact_feedforward`` of the measured
    contact force enters the bias (none by default). While a tip touches the ground during a planned stance, the tendons hold
    the hover torques and the arms follow the contact; the thrusts then track
    the body pose alone.
    """
    gains = ctrl.gains
    if terms is None:
        terms = dynamics_terms(state, params, g_frac)
    if G is None:
        G = input_map(state.q, params).G
    if lateral_ref is None:
        lateral_ref = arm_lateral_reference(params, ctrl.arm_hold_angle)
    nu_p, nu_R = virtual_accelerations(pose_errors(state, sample), sample, gains)
    nu_arm, grads = arm_errors(state, lateral_ref, gains, params)
    nu = assemble_nu(state, nu_p, nu_R, nu_arm, grads, gains.k_d_null)
    bias = terms.Cdq + terms.g + terms.damping
    touching = contact_force is not None and bool(np.any(np.asarray(contact_force)[:, 2] > 0.0))
    if touching and ctrl.contact_handling == "passive_arms" and ctrl.contact_feedforward:
        bias = bias - ctrl.contact_feedforward * external_generalized_force(state, contact_force, params)
    # passive arms only in a planned stance; a touch during planned flight is pushed away by the arm loops
    stance = touching and ctrl.contact_handling == "passive_arms" and sample.stance
    if stance:
        # unknowns: six thrusts and the six arm accelerations; tendons fixed
        tau = stance_tendon_torques(params, ctrl.arm_hold_angle)
        wrench = terms.B[:, :6] @ nu[:6] + bias - G[:, 6:] @ tau
        A = np.hstack([G[:, :6], -terms.B[:, 6:]])
        W = terms.B
    else:
        wrench = terms.B @ nu + bias
        if ctrl.allocation == "task_space":
            # arm accelerations along the null directions are left to the dynamics
            N = arm_null_directions(grads)
            A = np.hstack([G, -terms.B @ N])
            W = terms.B
        else:
            A = G
            W = terms.B if ctrl.allocation == "inertia_weighted" else None
    x, sigma_min = allocate(A, wrench, W)
    u = np.concatenate([x[:6], tau]) if stance else x[:9].copy()
    u_sat = u.copy()
    u_sat[:6] = np.clip(u[:6], 0.0, params.propeller.f_max)
    saturated = int(np.count_nonzero(u_sat[:6] != u[:6]))
    if saturated:
        x = bounded_allocation(A, wrench, terms.B, params.propeller.f_max, ctrl.saturation_weights)
        u_sat = np.concatenate([x[:6], tau]) if stance else x[:9].copy()
    if stance:
        nu = np.concatenate([nu[:6], x[6:]])
        wrench = wrench + G[:, 6:] @ tau + terms.B[:, 6:] @ x[6:]
    elif ctrl.allocation == "task_space":
        nu = nu + N @ x[9:]
        wrench = wrench + terms.B @ N @ x[9:]
    residual = float(np.linalg.norm(G @ u_sat - wrench))
    return ControlOutput(u=u_sat, u_unsaturated=u, saturated=saturated, residual=residual, sigma_min=sigma_min, nu=nu)


@lru_cache(maxsize=32)
def stance_tendon_torques(params: RobotParams, hold_angle):
    """Tendon torques held while the arms touch the ground (those of the hover equilibrium)."""
    _, u = hover_equilibrium(params, hold_angle)
    return u[6:9].copy()


def hover_equilibrium(params: RobotParams, hold_angle, p=(0.0, 0.0, 0.0), g_frac=1.0, yaw=0.0):
    """Level, motionless state whose gravity load lies in the range of the input map.

    The arm angles are adjusted so that each lateral tip coordinate matches
    the hold reference and the remaining passive arm mode is in balance.
    Returns the state and the exact compensating input.
    """
    w_ref = arm_lateral_reference(params, hold_angle)

    def make(x):
        return FullState.from_parts(p=p, eta=(0.0, 0.0, yaw), q_arm=x)

    def residual(x):
        state = make(x)
        terms = dynamics_terms(state, params, g_frac)
        G = input_map(state.q, params).G
        load = terms.g
        u = np.linalg.lstsq(G, load, rcond=None)[0]
        lat = [lateral_position(x[2 * k], x[2 * k + 1], params.arm)[0] - w_ref for k in range(3)]
        return np.concatenate([G @ u - load, lat])

    x0 = np.full(6, float(hold_angle))
    sol = least_squares(residual, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    state = make(sol.x)
    terms = dynamics_terms(state, params, g_frac)
    G = input_map(state.q, params).G
    u, _ = allocate(G, terms.g)
    return state, u
