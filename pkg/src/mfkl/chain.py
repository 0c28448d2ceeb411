"""The sampling chain: partial velocity refresh followed by one Verlet step.

One transition of the kernel is ``refresh`` then ``verlet``: velocities are
damped by ``eta = 1 - gamma h`` and reinflated with Gaussian noise, then the
pair (positions, velocities) moves along one step of the Verlet integrator
of the N-particle potential.  Gaussian draws are consumed particle-major,
coordinate-minor, which together with the keyed stream in :mod:`mfkl.rng`
fixes the meaning of "same seed" exactly.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    NumericalDomainError,
    ObserverError,
    StepSizeWarning,
)
from .model import ParticleState, Space, potential_gradient


@dataclass(frozen=True)
class ChainParams:
    """Step size, friction, trajectory length, and the master seed.

    The damping factor ``eta = 1 - gamma h`` is always recomputed from
    ``h`` and ``gamma``; requiring ``h < 1/gamma`` keeps it inside (0, 1).
    """

    h: float
    gamma: float
    n_steps: int
    master_seed: int = 0

    def __post_init__(self):
        if not self.h > 0.0:
            raise ConfigurationError("step size h must be positive")
        if not self.gamma > 0.0:
            raise ConfigurationError("friction gamma must be positive")
        if not self.h < 1.0 / self.gamma:
            raise ConfigurationError("need h < 1/gamma so the damping stays in (0, 1)")
        if self.n_steps < 0:
            raise ConfigurationError("n_steps must be nonnegative")
        if not 0 <= int(self.master_seed) <= 0xFFFFFFFFFFFFFFFF:
            raise ConfigurationError("master_seed must fit in 64 bits")

    @property
    def eta(self):
        return 1.0 - self.gamma * self.h


def warn_if_step_large(params, coeffs):
    """Non-fatal warning when h sqrt(m1x + m1m) > 1/10 (theory range)."""
    if coeffs.m1x is None or coeffs.m1m is None:
        return
    if params.h * np.sqrt(coeffs.m1x + coeffs.m1m) > 0.1:
        warnings.warn(
            "step size h sqrt(m1x + m1m) exceeds 1/10; the entropy decay "
            "constants are not guaranteed at this step size",
            StepSizeWarning,
            stacklevel=3,
        )


def verlet_step(model, state, h, leading_gradient=None):
    """One Verlet step of the Hamiltonian with the N-particle potential.

    Returns the new state only.  ``leading_gradient`` may carry a cached
    gradient at the current positions (the trailing gradient of the previous
    step); see :func:`verlet_step_cached` to retrieve the trailing gradient
    for reuse.
    """
    new_state, _ = verlet_step_cached(model, state, h, leading_gradient)
    return new_state


def verlet_step_cached(model, state, h, leading_gradient=None):
    """Verlet step returning ``(new_state, trailing_gradient)``.

    Exactly two gradient evaluations happen per step when no cache is
    passed; with a cache, one.  Torus positions are wrapped into [0,1)
    before the trailing gradient is evaluated, so cached and uncached runs
    agree bitwise.
    """
    if not h > 0.0:
        raise ConfigurationError("step size h must be positive")
    g0 = leading_gradient
    if g0 is None:
        g0 = potential_gradient(model, state.positions)
    x_new = state.positions + h * state.velocities - (0.5 * h * h) * g0
    x_new = state.space.wrap(x_new)
    try:
        g1 = potential_gradient(model, x_new)
    except NumericalDomainError as err:
        raise NumericalDomainError(f"trailing gradient failed mid-step: {err}") from err
    v_new = state.velocities - (0.5 * h) * (g0 + g1)
    if not (np.isfinite(x_new).all() and np.isfinite(v_new).all()):
        raise NumericalDomainError("non-finite state after Verlet update")
    return ParticleState(x_new, v_new, state.space), g1


def refresh_velocities(state, eta, rng=None, gaussians=None):
    """Partial Gaussian refresh: v <- eta v + sqrt(1 - eta^2) G.

    Positions are untouched.  ``gaussians`` injects the noise matrix
    directly (test hook); otherwise it is drawn from ``rng`` in
    particle-major, coordinate-minor order.
    """
    if not 0.0 < eta < 1.0:
        raise ConfigurationError("damping eta must lie in (0, 1)")
    if gaussians is None:
        if rng is None:
            raise ConfigurationError("refresh needs an rng or injected gaussians")
        gaussians = rng.normal_matrix(state.velocities.shape)
    v_new = eta * state.velocities + np.sqrt(1.0 - eta * eta) * gaussians
    return ParticleState(state.positions, v_new, state.space)


def kernel_step(model, state, params, rng):
    """One transition of the chain: refresh, then Verlet."""
    refreshed = refresh_velocities(state, params.eta, rng)
    return verlet_step(model, refreshed, params.h)


class Observer:
    """Strided trajectory callback collecting one record per visit.

    ``fn(step, state)`` is invoked at steps 0, stride, 2*stride, ... with a
    read-only state view; whatever it returns is appended to ``records``.
    """

    def __init__(self, fn, stride=1):
        if stride < 1:
            raise ConfigurationError("observer stride must be >= 1")
        self.fn = fn
        self.stride = stride
        self.records = []

    def notify(self, step, state):
        if step % self.stride == 0:
            try:
                self.records.append(self.fn(step, state))
            except Exception as err:  # noqa: BLE001 - context added, then re-raised
                raise ObserverError(
                    f"observer {getattr(self.fn, '__name__', self.fn)!r} "
                    f"failed at step {step}: {err}",
                    step=step,
                ) from err


def run_chain(model, init, params, observers=(), rng=None):
    """Advance the chain ``params.n_steps`` transitions from ``init``.

    Returns ``(final_state, records)`` where ``records`` lists each
    observer's collected records.  The trailing Verlet gradient is reused as
    the next leading gradient (the refresh does not move positions), which
    is bitwise identical to the naive two-evaluations-per-step kernel; the
    loop below performs exactly the arithmetic of ``refresh_velocities``
    followed by ``verlet_step_cached`` on raw arrays.
    """
    if rng is None:
        from .rng import RngStream

        rng = RngStream(params.master_seed)
    warn_if_step_large(params, model.coeffs)
    if init.space.d != model.space.d or init.space.kind != model.space.kind:
        raise ConfigurationError("initial state does not live in the model's space")
    for obs in observers:
        obs.notify(0, init.readonly_view())

    x = init.positions.copy()
    v = init.velocities.copy()
    space = init.space
    eta = params.eta
    sigma = np.sqrt(1.0 - eta * eta)
    h = params.h
    half_h = 0.5 * h
    half_h_sq = 0.5 * h * h
    gradient = None
    for step in range(1, params.n_steps + 1):
        v = eta * v + sigma * rng.normal_matrix(v.shape)
        if gradient is None:
            gradient = potential_gradient(model, x)
        x = space.wrap(x + h * v - half_h_sq * gradient)
        try:
            trailing = potential_gradient(model, x)
        except NumericalDomainError as err:
            raise NumericalDomainError(f"step {step}: {err}") from err
        v = v - half_h * (gradient + trailing)
        gradient = trailing
        if not np.isfinite(v).all():
            raise NumericalDomainError(f"step {step}: non-finite velocities")
        if observers:
            snapshot = ParticleState(x, v, space).readonly_view()
            for obs in observers:
                obs.notify(step, snapshot)
    return ParticleState(x, v, space), [getattr(obs, "records", None) for obs in observers]


def sample_initial(law, n_particles, space, rng):
    """Draw an exchangeable initial state: iid positions, Gaussian velocities.

    ``law`` is a mapping with ``kind`` one of ``point`` (field ``at``),
    ``gaussian`` (fields ``mean``, ``std``, optional ``wrap`` on the torus)
    or ``uniform`` (torus only).  Positions are drawn first, then
    velocities, both particle-major.
    """
    if n_particles < 1:
        raise ConfigurationError("need at least one particle")
    kind = law.get("kind")
    d = space.d
    if kind == "point":
        at = np.asarray(law.get("at", 0.0), dtype=float)
        point = np.broadcast_to(np.atleast_1d(at), (d,))
        if space.is_torus and ((point < 0.0).any() or (point >= 1.0).any()):
            raise ConfigurationError("point mass must lie in [0,1)^d on the torus")
        positions = np.tile(point, (n_particles, 1))
    elif kind == "gaussian":
        if space.is_torus and not law.get("wrap", False):
            raise ConfigurationError(
                "gaussian initial positions on the torus need wrap=true"
            )
        mean = np.broadcast_to(np.atleast_1d(np.asarray(law.get("mean", 0.0), float)), (d,))
        std = float(law.get("std", 1.0))
        positions = mean + std * rng.normal_matrix((n_particles, d))
        positions = space.wrap(positions)
    elif kind == "uniform":
        if not space.is_torus:
            raise ConfigurationError("uniform initial positions are torus-only")
        positions = rng.uniforms(n_particles * d).reshape(n_particles, d)
    else:
        raise ConfigurationError(f"unknown initial law kind {kind!r}")
    velocities = rng.normal_matrix((n_particles, d))
    return ParticleState(positions, velocities, space)
