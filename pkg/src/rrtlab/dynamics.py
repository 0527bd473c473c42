"""Forward simulation for the kinematic car and the holonomic straight step."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .space import CarMetric, CarState, ContractError, RngStream, wrap_angle


class ControlInput(NamedTuple):
    v: float
    phi: float


@dataclass(frozen=True)
class CarModel:
    """Kinematic car: x' = v cos(theta), y' = v sin(theta), theta' = (v / L) tan(phi).

    The control set is ``velocities x steering``, enumerated velocity-major in
    the given order; that order is the tie-break for :func:`best_input`.
    """

    wheelbase: float = 1.0
    velocities: tuple = (1.0,)
    steering: tuple = (-0.5, -0.25, 0.0, 0.25, 0.5)
    max_steer: float = 1.2

    def __post_init__(self) -> None:
        object.__setattr__(self, "velocities", tuple(float(v) for v in self.velocities))
        object.__setattr__(self, "steering", tuple(float(p) for p in self.steering))
        if not self.wheelbase > 0:
            raise ContractError("wheelbase must be positive")
        if not self.velocities or not self.steering:
            raise ContractError("control set must be non-empty")
        if not 0 < self.max_steer < math.pi / 2:
            raise ContractError("max_steer must lie in (0, pi/2)")
        for p in self.steering:
            if abs(p) > self.max_steer:
                raise ContractError(f"steering angle {p} exceeds max_steer {self.max_steer}")

    @property
    def controls(self) -> tuple:
        return tuple(ControlInput(v, p) for v in self.velocities for p in self.steering)

    def derivative(self, s: Sequence[float], u: ControlInput) -> tuple:
        v = u.v
        th = s[2]
        return (v * math.cos(th), v * math.sin(th), v / self.wheelbase * math.tan(u.phi))


@dataclass(frozen=True)
class IntegrationSpec:
    dt: float = 0.5
    substeps: int = 10

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ContractError("dt must be positive")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ContractError("substeps must be an integer >= 1")


def propagate_trajectory(
    model: CarModel, s: Sequence[float], u: ControlInput, ispec: IntegrationSpec
) -> list:
    """RK4 integration over ``ispec.dt``; returns the state after every substep.

    Heading is kept unwrapped inside the integrator and wrapped on output.
    """
    h = ispec.dt / ispec.substeps
    x, y, th = float(s[0]), float(s[1]), float(s[2])
    v = u.v
    # theta' is constant for fixed controls
    omega = v / model.wheelbase * math.tan(u.phi)
    out = []
    for _ in range(ispec.substeps):
        th2 = th + 0.5 * h * omega
        th4 = th + h * omega
        c1, s1 = math.cos(th), math.sin(th)
        c2, s2 = math.cos(th2), math.sin(th2)
        c4, s4 = math.cos(th4), math.sin(th4)
        # k2 and k3 share the midpoint heading
        x += h / 6.0 * v * (c1 + 4.0 * c2 + c4)
        y += h / 6.0 * v * (s1 + 4.0 * s2 + s4)
        th = th4
        out.append(CarState(x, y, wrap_angle(th)))
    return out


def propagate(model: CarModel, s: Sequence[float], u: ControlInput, ispec: IntegrationSpec) -> CarState:
    return propagate_trajectory(model, s, u, ispec)[-1]


def best_input(
    model: CarModel,
    s_near: Sequence[float],
    x_rand: Sequence[float],
    ispec: IntegrationSpec,
    metric: CarMetric,
) -> tuple:
    """Control from U whose propagated state lands closest to ``x_rand``.

    Returns ``(u, trajectory)``; the final trajectory entry is the new state.
    The first control in enumeration order wins ties.
    """
    best = None
    best_d = math.inf
    for u in model.controls:
        traj = propagate_trajectory(model, s_near, u, ispec)
        d = metric.squared(traj[-1], x_rand)
        if d < best_d:
            best, best_d = (u, traj), d
    return best


def random_input(
    model: CarModel, s_near: Sequence[float], ispec: IntegrationSpec, rng: RngStream
) -> tuple:
    controls = model.controls
    u = controls[rng.integers(len(controls))]
    return u, propagate_trajectory(model, s_near, u, ispec)


def holonomic_step(s_near: Sequence[float], x_rand: Sequence[float], eps: float) -> tuple:
    """Move from ``s_near`` toward ``x_rand`` by at most ``eps``."""
    if not eps > 0:
        raise ContractError("eps must be positive")
    diff = [b - a for a, b in zip(s_near, x_rand)]
    dist = math.sqrt(sum(d * d for d in diff))
    if dist <= eps:
        return tuple(x_rand)
    scale = eps / dist
    return tuple(a + scale * d for a, d in zip(s_near, diff))
