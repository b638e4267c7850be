"""Turn a raw edited trajectory into a kinematically feasible one.

Three stages: penalized least-squares spline smoothing, sigmoid blending with
the base trajectory (weight on the base starts near 1 and hands over by
mid-horizon), and a tracked rollout of the bicycle plant under LQR steering
with PD speed control. The rollout output is feasible by construction; the
report quantifies how well it stayed within the plant limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .geometry import curvature_profile, polyline_arclength, right_normal, wrap_angle
from .trajgen import Frame, Stage, Trajectory
from .world.vehicle import BicycleParams, VehicleState, step_vehicle


# ---------------------------------------------------------------------------
# spline smoothing


def bspline_smooth(t: Trajectory, degree: int = 3, smoothing: float = 0.5,
                   knot_spacing: int = 5) -> Trajectory:
    """Least-squares spline fit per coordinate with a second-difference penalty.

    The fit is evaluated back at the original N indices; both endpoints are
    interpolated exactly. Degenerate input (all points identical) is returned
    unchanged.
    """
    n = t.n
    if n <= degree:
        raise ValueError(f"need more than degree={degree} points, got {n}")
    pts = t.points
    if float(np.max(np.linalg.norm(pts - pts[0], axis=1))) < 1e-12:
        return t.derive(Stage.SMOOTHED, pts.copy())

    x = np.arange(n, dtype=float)
    n_interior = max((n - 2) // max(knot_spacing, 1), 0)
    interior = np.linspace(0.0, n - 1.0, n_interior + 2)[1:-1]
    knots = np.concatenate([[0.0] * (degree + 1), interior, [n - 1.0] * (degree + 1)])
    design = BSpline.design_matrix(x, knots, degree).toarray()
    n_coef = design.shape[1]

    d2 = np.zeros((n - 2, n))
    idx = np.arange(n - 2)
    d2[idx, idx] = 1.0
    d2[idx, idx + 1] = -2.0
    d2[idx, idx + 2] = 1.0
    penalty = d2 @ design

    # clamped knots make the first/last basis functions interpolate the ends,
    # so pinning those two coefficients pins the endpoints
    mid = slice(1, n_coef - 1)
    out = np.empty_like(pts)
    sqrt_lam = math.sqrt(max(smoothing, 0.0))
    for dim in range(2):
        y = pts[:, dim]
        c0, c1 = y[0], y[-1]
        rhs_data = y - design[:, 0] * c0 - design[:, -1] * c1
        rhs_pen = -(penalty[:, 0] * c0 + penalty[:, -1] * c1)
        a_mat = np.vstack([design[:, mid], sqrt_lam * penalty[:, mid]])
        b_vec = np.concatenate([rhs_data, sqrt_lam * rhs_pen])
        c_mid, *_ = np.linalg.lstsq(a_mat, b_vec, rcond=None)
        coef = np.concatenate([[c0], c_mid, [c1]])
        out[:, dim] = design @ coef
    return t.derive(Stage.SMOOTHED, out)


# ---------------------------------------------------------------------------
# sigmoid fusion


@dataclass(frozen=True)
class SigmoidFuseParams:
    weight_factor: float = 6.0      # steepness of the handover

    def __post_init__(self) -> None:
        if self.weight_factor <= 0:
            raise ValueError("weight_factor must be positive")


def sigmoid_weights(m: float, n: int) -> np.ndarray:
    """w_i = 1 / (1 + exp(m (2i - n) / n)) for i = 1..n."""
    i = np.arange(1, n + 1, dtype=float)
    return 1.0 / (1.0 + np.exp(m * (2.0 * i - n) / n))


def sigmoid_fuse(base: Trajectory, smoothed: Trajectory,
                 params: SigmoidFuseParams = SigmoidFuseParams()) -> Trajectory:
    if base.n != smoothed.n:
        raise ValueError(f"length mismatch: {base.n} vs {smoothed.n}")
    if base.frame is not smoothed.frame:
        raise ValueError(f"frame mismatch: {base.frame.value} vs {smoothed.frame.value}")
    w = sigmoid_weights(params.weight_factor, base.n)[:, None]
    pts = w * base.points + (1.0 - w) * smoothed.points
    return Trajectory(stage=Stage.CURVE, points=pts, dt=base.dt, frame=base.frame)


# ---------------------------------------------------------------------------
# LQR tracking


@dataclass(frozen=True)
class LqrParams:
    q_diag: tuple[float, float, float, float] = (1.0, 0.1, 2.0, 0.1)
    r_value: float = 10.0
    riccati_tol: float = 1e-9
    riccati_max_iter: int = 10_000
    accel_kp: float = 1.5           # 1/s, speed-error gain
    accel_kd: float = 0.1
    gain_speed_floor: float = 0.5   # m/s; the model is uncontrollable at rest
    gain_speed_quantum: float = 0.25

    def __post_init__(self) -> None:
        if any(q < 0 for q in self.q_diag):
            raise ValueError("Q diagonal entries must be >= 0")
        if self.r_value <= 0:
            raise ValueError("R must be positive")


class RiccatiError(RuntimeError):
    pass


def lateral_dynamics(speed: float, dt: float,
                     plant: BicycleParams = BicycleParams()) -> tuple[np.ndarray, np.ndarray]:
    """Discrete error dynamics, state [e_lat, e_lat_rate, e_head, e_head_rate],
    control = front-wheel angle."""
    a = np.array([
        [1.0, dt, 0.0, 0.0],
        [0.0, 0.0, speed, 0.0],
        [0.0, 0.0, 1.0, dt],
        [0.0, 0.0, 0.0, 0.0],
    ])
    b = np.array([[0.0], [0.0], [0.0], [speed / plant.wheelbase]])
    return a, b


def solve_lqr_gain(speed: float, dt: float, params: LqrParams = LqrParams(),
                   plant: BicycleParams = BicycleParams()) -> np.ndarray:
    """Infinite-horizon gain by iterating the Riccati recursion to a fixed point."""
    speed = max(speed, params.gain_speed_floor)
    a, b = lateral_dynamics(speed, dt, plant)
    q = np.diag(params.q_diag)
    r = np.array([[params.r_value]])
    p = q.copy()
    for _ in range(params.riccati_max_iter):
        bp = b.T @ p
        k = np.linalg.solve(r + bp @ b, bp @ a)
        p_next = q + a.T @ p @ (a - b @ k)
        if float(np.max(np.abs(p_next - p))) < params.riccati_tol:
            p = p_next
            break
        p = p_next
    else:
        rho = float(np.max(np.abs(np.linalg.eigvals(a))))
        raise RiccatiError(
            f"Riccati iteration did not converge; plant spectral radius {rho:.6f}")
    bp = b.T @ p
    return np.linalg.solve(r + bp @ b, bp @ a)


class _GainCache:
    def __init__(self, params: LqrParams, dt: float, plant: BicycleParams):
        self.params = params
        self.dt = dt
        self.plant = plant
        self._cache: dict[int, np.ndarray] = {}

    def gain(self, speed: float) -> np.ndarray:
        quantum = self.params.gain_speed_quantum
        key = int(round(max(speed, self.params.gain_speed_floor) / quantum))
        if key not in self._cache:
            self._cache[key] = solve_lqr_gain(key * quantum, self.dt, self.params, self.plant)
        return self._cache[key]


@dataclass
class TrackedRollout:
    trajectory: Trajectory
    states: list[VehicleState]
    controls: list[dict]


def reference_profile(curve: np.ndarray, start: VehicleState, dt: float):
    """Per-point reference (heading, speed, yaw rate) finite-differenced from the curve."""
    prev = np.vstack([[start.x, start.y], curve[:-1]])
    seg = curve - prev
    dist = np.linalg.norm(seg, axis=1)
    headings = np.where(dist > 1e-9, np.arctan2(seg[:, 1], seg[:, 0]), np.nan)
    # carry the previous heading through stationary samples
    last = start.heading
    for i in range(len(headings)):
        if math.isnan(headings[i]):
            headings[i] = last
        last = headings[i]
    speeds = np.maximum(dist / dt, 0.0)
    yaw_rates = np.empty_like(speeds)
    prev_h = start.heading
    for i, h in enumerate(headings):
        yaw_rates[i] = wrap_angle(h - prev_h) / dt
        prev_h = h
    return headings, speeds, yaw_rates


def lqr_track(curve: Trajectory, start: VehicleState, dt: float,
              params: LqrParams = LqrParams(),
              plant: BicycleParams = BicycleParams()) -> TrackedRollout:
    """Roll the bicycle plant along the curve under LQR steering + PD speed."""
    if curve.frame is not Frame.WORLD:
        raise ValueError("lqr_track expects a world-frame curve")
    pts = curve.points
    headings, speeds, yaw_rates = reference_profile(pts, start, dt)
    gains = _GainCache(params, dt, plant)

    v = start.copy()
    out = np.empty_like(pts)
    states: list[VehicleState] = []
    controls: list[dict] = []
    prev_speed_err = speeds[0] - v.speed
    for i in range(len(pts)):
        ref_h = headings[i]
        e_head = wrap_angle(v.heading - ref_h)
        e_lat = float(np.dot(v.position() - pts[i], right_normal(ref_h)))
        state_vec = np.array([
            e_lat,
            v.speed * math.sin(e_head),
            e_head,
            v.yaw_rate - yaw_rates[i],
        ])
        k = gains.gain(v.speed)
        delta = float(-(k @ state_vec)[0])
        steer = min(max(delta / plant.max_wheel_angle, -1.0), 1.0)

        speed_err = speeds[i] - v.speed
        a_des = params.accel_kp * speed_err + params.accel_kd * (speed_err - prev_speed_err) / dt
        prev_speed_err = speed_err
        accel = a_des / plant.max_accel if a_des >= 0 else a_des / plant.max_brake
        accel = min(max(accel, -1.0), 1.0)

        v = step_vehicle(v, steer, accel, dt, plant)
        out[i] = v.position()
        states.append(v.copy())
        controls.append({
            "steer": steer, "accel": accel,
            "e_lat": e_lat, "e_head": e_head, "v_ref": float(speeds[i]),
        })
    traj = Trajectory(stage=Stage.FINAL, points=out, dt=dt, frame=Frame.WORLD)
    return TrackedRollout(trajectory=traj, states=states, controls=controls)


# ---------------------------------------------------------------------------
# feasibility


@dataclass(frozen=True)
class FeasibilityLimits:
    max_curvature: float
    max_accel: float
    max_steer_proxy: float = 1.0
    rel_tol: float = 0.05
    abs_curvature_tol: float = 0.01
    abs_accel_tol: float = 0.25

    @classmethod
    def from_plant(cls, plant: BicycleParams = BicycleParams()) -> "FeasibilityLimits":
        return cls(
            max_curvature=math.tan(plant.max_wheel_angle) / plant.wheelbase,
            max_accel=max(plant.max_accel, plant.max_brake),
        )


@dataclass
class FeasibilityReport:
    max_curvature: float
    max_accel: float
    max_steer_proxy: float
    within_limits: bool


def feasibility_report(t: Trajectory, dt: float,
                       limits: FeasibilityLimits | None = None,
                       plant: BicycleParams = BicycleParams()) -> FeasibilityReport:
    """Curvature/acceleration bounds check from finite differences.

    Acceleration is along-track (arc-length second differences); the lateral
    component is already bounded by the curvature limit.
    """
    if t.n < 3:
        raise ValueError("need at least 3 points")
    if limits is None:
        limits = FeasibilityLimits.from_plant(plant)
    # near-stationary chords make Menger curvature a noise amplifier; skip them
    curv = curvature_profile(t.points, min_spacing=0.15)
    max_curv = float(curv.max()) if len(curv) else 0.0

    arcs = polyline_arclength(t.points)
    speeds = np.diff(arcs) / dt
    accels = np.diff(speeds) / dt
    max_accel = float(np.max(np.abs(accels))) if len(accels) else 0.0

    steer_proxy = math.atan(max_curv * plant.wheelbase) / plant.max_wheel_angle

    ok = (max_curv <= limits.max_curvature * (1.0 + limits.rel_tol) + limits.abs_curvature_tol
          and max_accel <= limits.max_accel * (1.0 + limits.rel_tol) + limits.abs_accel_tol
          and steer_proxy <= limits.max_steer_proxy * (1.0 + limits.rel_tol))
    return FeasibilityReport(
        max_curvature=max_curv,
        max_accel=max_accel,
        max_steer_proxy=steer_proxy,
        within_limits=ok,
    )
