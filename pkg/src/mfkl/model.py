"""State spaces, particle states, and mean-field energy models.

A model is described by the force its energy functional exerts on a
particle given the empirical measure of all particles, i.e. the gradient
of the first variation of the energy.  The N-particle potential is N times
the energy of the empirical measure; its gradient drives the sampler.

All reductions over particles (means, pair sums) sort their contributions
componentwise before summing.  Floating-point summation of a sorted
sequence does not depend on the original particle order, which makes every
force evaluation bitwise permutation-equivariant.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError, ConfigurationError, NumericalDomainError

EUCLIDEAN = "euclidean"
TORUS = "torus"


def ordered_sum(values, axis):
    """Sum along ``axis`` in ascending value order (permutation-invariant)."""
    return np.sum(np.sort(values, axis=axis), axis=axis)


def ordered_mean(values, axis, keepdims=False):
    out = ordered_sum(values, axis) / values.shape[axis]
    if keepdims:
        out = np.expand_dims(out, axis)
    return out


@dataclass(frozen=True)
class Space:
    """Ambient space: Euclidean R^d or the flat torus [0,1)^d."""

    kind: str
    d: int

    def __post_init__(self):
        if self.kind not in (EUCLIDEAN, TORUS):
            raise ConfigurationError(f"unknown space kind {self.kind!r}")
        if int(self.d) < 1:
            raise ConfigurationError("space dimension must be >= 1")

    @property
    def is_torus(self):
        return self.kind == TORUS

    def wrap(self, positions):
        """Canonical representative: componentwise in [0,1) on the torus."""
        if not self.is_torus:
            return positions
        return positions - np.floor(positions)

    def min_image(self, delta):
        """Minimal-image displacement in (-1/2, 1/2]^d (identity on R^d)."""
        if not self.is_torus:
            return delta
        return 0.5 - np.mod(0.5 - delta, 1.0)


@dataclass
class ParticleState:
    """Positions and velocities of N particles, tagged with their space."""

    positions: np.ndarray
    velocities: np.ndarray
    space: Space

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.velocities = np.asarray(self.velocities, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape != self.velocities.shape:
            raise ConfigurationError(
                "positions and velocities must be matching (N, d) arrays"
            )
        n, d = self.positions.shape
        if n < 1:
            raise ConfigurationError("need at least one particle")
        if d != self.space.d:
            raise ConfigurationError(
                f"state dimension {d} does not match space dimension {self.space.d}"
            )
        if not (np.isfinite(self.positions).all() and np.isfinite(self.velocities).all()):
            raise NumericalDomainError("non-finite entries in particle state")
        if self.space.is_torus and (
            (self.positions < 0.0).any() or (self.positions >= 1.0).any()
        ):
            raise ConfigurationError("torus positions must lie in [0, 1)")

    @property
    def n_particles(self):
        return self.positions.shape[0]

    @property
    def d(self):
        return self.positions.shape[1]

    def copy(self):
        return ParticleState(self.positions.copy(), self.velocities.copy(), self.space)

    def readonly_view(self):
        """Same data with write access disabled (handed to observers)."""
        pos = self.positions.view()
        vel = self.velocities.view()
        pos.flags.writeable = False
        vel.flags.writeable = False
        view = object.__new__(ParticleState)
        view.positions = pos
        view.velocities = vel
        view.space = self.space
        return view


_COEFF_FIELDS = (
    "m1x", "m1m", "l1", "l2", "l3", "df_sup",
    "m_bnd", "lambda_growth", "r_conf", "k_conf", "l_hess",
    "c0", "c1", "r0_low", "r1_up",
)


@dataclass(frozen=True)
class ModelCoefficients:
    """Declared regularity and drift coefficients of a model.

    Every field is optional; diagnostics that need an absent coefficient
    raise :class:`CapabilityError` instead of guessing.  ``l1`` must equal
    ``m1x + m1m`` whenever all three are declared.
    """

    m1x: float | None = None
    m1m: float | None = None
    l1: float | None = None
    l2: float | None = None
    l3: float | None = None
    df_sup: float | None = None
    m_bnd: float | None = None
    lambda_growth: float | None = None
    r_conf: float | None = None
    k_conf: float | None = None
    l_hess: float | None = None
    c0: float | None = None
    c1: float | None = None
    r0_low: float | None = None
    r1_up: float | None = None

    def __post_init__(self):
        for name in _COEFF_FIELDS:
            value = getattr(self, name)
            if value is not None and (not math.isfinite(value) or value < 0.0):
                raise ConfigurationError(f"coefficient {name} must be a nonnegative real")
        if self.c0 is not None and self.c1 is not None and self.c0 > self.c1:
            raise ConfigurationError("need c0 <= c1")
        if self.r0_low is not None and self.r1_up is not None and self.r0_low > self.r1_up:
            raise ConfigurationError("need r0_low <= r1_up")
        if self.m1x is not None and self.m1m is not None and self.l1 is not None:
            if not math.isclose(self.l1, self.m1x + self.m1m, rel_tol=1e-12, abs_tol=1e-12):
                raise ConfigurationError("l1 must equal m1x + m1m when all are declared")

    def require(self, *names):
        """Return the named coefficients, or raise naming what is missing."""
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise CapabilityError(
                "model does not declare coefficient(s) "
                + ", ".join(missing)
                + "; the dependent diagnostic is disabled"
            )
        return tuple(getattr(self, n) for n in names)


@dataclass
class MeanFieldModel:
    """Mean-field energy exposed through its force on a single particle.

    ``force(positions, x)`` evaluates the intrinsic derivative of the energy
    at the empirical measure of ``positions``, at the query point ``x``.  It
    must be pure and permutation-invariant in the particle rows.

    ``force_all`` is an optional vectorized evaluation returning the force
    at every particle of ``positions`` (any number of leading batch axes);
    its rows must coincide bitwise with per-row ``force`` calls.
    """

    space: Space
    force: "callable"
    coeffs: ModelCoefficients = field(default_factory=ModelCoefficients)
    force_all: "callable | None" = None
    energy: "callable | None" = None
    linear_derivative: "callable | None" = None
    external_potential: "callable | None" = None
    name: str = "custom"


def potential_gradient(model, positions):
    """Gradient of the N-particle potential: row i is the force at particle i.

    Accepts leading batch axes when the model provides a vectorized
    ``force_all``; otherwise falls back to one ``force`` call per particle.
    """
    positions = np.asarray(positions, dtype=float)
    if model.force_all is not None:
        grad = model.force_all(positions)
    else:
        if positions.ndim != 2:
            raise CapabilityError("batched gradients need a model with force_all")
        grad = np.stack([model.force(positions, positions[i]) for i in range(positions.shape[0])])
    if not np.isfinite(grad).all():
        bad = np.argwhere(~np.isfinite(grad).all(axis=-1))
        index = tuple(int(i) for i in bad[0])
        raise NumericalDomainError(f"non-finite force at particle index {index}")
    return grad


def system_potential(model, positions):
    """N-particle potential: N times the energy of the empirical measure."""
    positions = np.asarray(positions, dtype=float)
    if model.energy is None:
        raise CapabilityError("model does not expose an energy")
    value = positions.shape[-2] * model.energy(positions)
    if not np.all(np.isfinite(value)):
        raise NumericalDomainError("non-finite potential value")
    return value


# ---------------------------------------------------------------------------
# built-in models


def pairwise_model(space, grad_v, grad_w, v=None, w=None, coeffs=None, name="pairwise"):
    """Energy from an external potential V and a symmetric pair kernel W.

    ``grad_v(x)`` and ``grad_w(x, y)`` (gradient in the first argument) must
    broadcast over leading axes.  The self-interaction term j = i is kept in
    the pair sum, matching the empirical-measure definition of the force.
    ``v``/``w`` enable the energy; on the torus the callables themselves are
    responsible for periodicity.
    """

    def force(positions, x):
        positions = np.asarray(positions, dtype=float)
        x = np.asarray(x, dtype=float)
        pair = grad_w(np.broadcast_to(x, positions.shape), positions)
        return grad_v(x) + ordered_sum(pair, axis=-2) / positions.shape[-2]

    def force_all(positions):
        positions = np.asarray(positions, dtype=float)
        n = positions.shape[-2]
        pair = grad_w(positions[..., :, None, :], positions[..., None, :, :])
        return grad_v(positions) + ordered_sum(pair, axis=-2) / n

    energy = None
    if v is not None and w is not None:
        def energy(positions):
            positions = np.asarray(positions, dtype=float)
            n = positions.shape[-2]
            ext = ordered_sum(v(positions), axis=-1) / n
            pair = w(positions[..., :, None, :], positions[..., None, :, :])
            inter = ordered_sum(pair.reshape(pair.shape[:-2] + (n * n,)), axis=-1)
            return ext + inter / (2.0 * n * n)

    return MeanFieldModel(
        space=space,
        force=force,
        force_all=force_all,
        energy=energy,
        coeffs=coeffs or ModelCoefficients(),
        name=name,
    )


def quadratic_model(r, s, d=1):
    """Quadratic confinement (r/2)|x|^2 with quadratic interaction s|x-y|^2.

    The mean-field force is ``r x + 2 s (x - mean)``; the stationary law in
    one dimension is the centered Gaussian with variance 1/(r + 2 s).
    """
    if r <= 0.0:
        raise ConfigurationError("quadratic model needs r > 0")
    if s < 0.0:
        raise ConfigurationError("quadratic model needs s >= 0")
    space = Space(EUCLIDEAN, d)

    def force(positions, x):
        positions = np.asarray(positions, dtype=float)
        x = np.asarray(x, dtype=float)
        mean = ordered_mean(positions, axis=-2)
        return r * x + 2.0 * s * (x - mean)

    def force_all(positions):
        positions = np.asarray(positions, dtype=float)
        mean = ordered_mean(positions, axis=-2, keepdims=True)
        return r * positions + 2.0 * s * (positions - mean)

    def energy(positions):
        positions = np.asarray(positions, dtype=float)
        sq = np.sum(positions * positions, axis=-1)
        m2 = ordered_mean(sq, axis=-1)
        m1 = ordered_mean(positions, axis=-2)
        return 0.5 * r * m2 + s * (m2 - np.sum(m1 * m1, axis=-1))

    def linear_derivative(density, x):
        m1 = density.expectation(lambda y: y)
        m2 = density.expectation(lambda y: y * y)
        x = np.asarray(x, dtype=float)
        return 0.5 * r * x * x + s * (x * x - 2.0 * x * m1 + m2)

    coeffs = ModelCoefficients(
        m1x=r + 2.0 * s,
        m1m=2.0 * s,
        l1=r + 4.0 * s,
        l2=0.0,
        l3=0.0,
        lambda_growth=2.0 * s,
        m_bnd=0.0,
        r_conf=r,
        k_conf=0.0,
        l_hess=r,
        c0=0.5 * r,
        c1=0.5 * r,
        r0_low=0.0,
        r1_up=0.0,
    )
    model = MeanFieldModel(
        space=space,
        force=force,
        force_all=force_all,
        energy=energy,
        linear_derivative=linear_derivative if d == 1 else None,
        external_potential=lambda x: 0.5 * r * np.sum(np.atleast_1d(x) ** 2, axis=-1),
        coeffs=coeffs,
        name=f"quadratic(r={r}, s={s})",
    )
    return model


def gauss_attract_repel_model(big_l, s, r, d=1):
    """Gaussian short-range repulsion with quadratic long-range attraction.

    Pair kernel ``L exp(-|x-y|^2) + s |x-y|^2`` over confinement
    ``(r/2)|x|^2``.  The bounded part of the mean-field force never exceeds
    ``L * sqrt(2) * exp(-1/2)`` in norm.
    """
    if r <= 0.0:
        raise ConfigurationError("gauss_attract_repel needs r > 0")
    if big_l < 0.0 or s < 0.0:
        raise ConfigurationError("gauss_attract_repel needs L >= 0 and s >= 0")
    space = Space(EUCLIDEAN, d)

    def pair_grad(x, y):
        delta = x - y
        sq = np.sum(delta * delta, axis=-1, keepdims=True)
        return (-2.0 * big_l) * np.exp(-sq) * delta + 2.0 * s * delta

    def pair_w(x, y):
        delta = x - y
        sq = np.sum(delta * delta, axis=-1)
        return big_l * np.exp(-sq) + s * sq

    def force(positions, x):
        positions = np.asarray(positions, dtype=float)
        x = np.asarray(x, dtype=float)
        pair = pair_grad(np.broadcast_to(x, positions.shape), positions)
        return r * x + ordered_sum(pair, axis=-2) / positions.shape[-2]

    def force_all(positions):
        positions = np.asarray(positions, dtype=float)
        n = positions.shape[-2]
        pair = pair_grad(positions[..., :, None, :], positions[..., None, :, :])
        return r * positions + ordered_sum(pair, axis=-2) / n

    def energy(positions):
        positions = np.asarray(positions, dtype=float)
        n = positions.shape[-2]
        sq = np.sum(positions * positions, axis=-1)
        ext = 0.5 * r * ordered_mean(sq, axis=-1)
        pair = pair_w(positions[..., :, None, :], positions[..., None, :, :])
        inter = ordered_sum(pair.reshape(pair.shape[:-2] + (n * n,)), axis=-1)
        return ext + inter / (2.0 * n * n)

    def linear_derivative(density, x):
        x = np.asarray(x, dtype=float)
        y = density.centers
        delta = x[..., None] - y
        kernel = big_l * np.exp(-delta * delta) + s * delta * delta
        return 0.5 * r * x * x + kernel @ (density.values * density.dx)

    bounded_force = big_l * math.sqrt(2.0) * math.exp(-0.5)
    hess_w1 = 2.0 * big_l  # curvature bound of the Gaussian bump, d = 1
    coeffs = ModelCoefficients(
        m1x=r + 2.0 * s + hess_w1,
        m1m=2.0 * s + hess_w1,
        l1=r + 4.0 * s + 2.0 * hess_w1,
        lambda_growth=2.0 * s,
        m_bnd=bounded_force,
        r_conf=r,
        k_conf=0.0,
        l_hess=r,
        c0=0.5 * r,
        c1=0.5 * r,
        r0_low=0.0,
        r1_up=0.0,
    )
    return MeanFieldModel(
        space=space,
        force=force,
        force_all=force_all,
        energy=energy,
        linear_derivative=linear_derivative if d == 1 else None,
        external_potential=lambda x: 0.5 * r * np.sum(np.atleast_1d(x) ** 2, axis=-1),
        coeffs=coeffs,
        name=f"gauss_attract_repel(L={big_l}, s={s}, r={r})",
    )


def torus_trig_model(a, b, d=1):
    """Periodic cosine potential and cosine pair kernel on the torus.

    ``V(x) = a sum_j cos(2 pi x_j)``, ``W(delta) = b sum_j cos(2 pi delta_j)``
    with minimal-image displacements.  The mean-field force is bounded by
    ``2 pi (|a| + |b|) sqrt(d)``.
    """
    space = Space(TORUS, d)
    two_pi = 2.0 * np.pi

    def grad_v(x):
        return -two_pi * a * np.sin(two_pi * x)

    def pair_grad(x, y):
        delta = space.min_image(x - y)
        return -two_pi * b * np.sin(two_pi * delta)

    def force(positions, x):
        positions = np.asarray(positions, dtype=float)
        x = np.asarray(x, dtype=float)
        pair = pair_grad(np.broadcast_to(x, positions.shape), positions)
        return grad_v(x) + ordered_sum(pair, axis=-2) / positions.shape[-2]

    def force_all(positions):
        positions = np.asarray(positions, dtype=float)
        n = positions.shape[-2]
        pair = pair_grad(positions[..., :, None, :], positions[..., None, :, :])
        return grad_v(positions) + ordered_sum(pair, axis=-2) / n

    def energy(positions):
        positions = np.asarray(positions, dtype=float)
        n = positions.shape[-2]
        ext = ordered_mean(np.sum(a * np.cos(two_pi * positions), axis=-1), axis=-1)
        delta = space.min_image(positions[..., :, None, :] - positions[..., None, :, :])
        pair = np.sum(b * np.cos(two_pi * delta), axis=-1)
        inter = ordered_sum(pair.reshape(pair.shape[:-2] + (n * n,)), axis=-1)
        return ext + inter / (2.0 * n * n)

    def linear_derivative(density, x):
        x = np.asarray(x, dtype=float)
        weights = density.values * density.dx
        cos_avg = float(np.cos(two_pi * density.centers) @ weights)
        sin_avg = float(np.sin(two_pi * density.centers) @ weights)
        return a * np.cos(two_pi * x) + b * (
            np.cos(two_pi * x) * cos_avg + np.sin(two_pi * x) * sin_avg
        )

    coeffs = ModelCoefficients(
        m1x=4.0 * np.pi ** 2 * (abs(a) + abs(b)),
        m1m=4.0 * np.pi ** 2 * abs(b),
        l1=4.0 * np.pi ** 2 * (abs(a) + 2.0 * abs(b)),
        df_sup=two_pi * (abs(a) + abs(b)) * math.sqrt(d),
    )
    return MeanFieldModel(
        space=space,
        force=force,
        force_all=force_all,
        energy=energy,
        linear_derivative=linear_derivative if d == 1 else None,
        external_potential=lambda x: np.sum(a * np.cos(two_pi * np.atleast_1d(x)), axis=-1),
        coeffs=coeffs,
        name=f"torus_trig(a={a}, b={b})",
    )


def _sigmoid(t):
    return 1.0 / (1.0 + np.exp(-t))


def flat_convex_regression_model(xs, ys, ridge_r=1.0):
    """Mean-field ridge regression of a single sigmoid neuron population.

    Quadratic loss against a finite dataset; the population predictor is
    the average of ``sigmoid(theta . x)`` over particles, which makes the
    data term convex along linear interpolations of measures.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 2 or ys.ndim != 1 or xs.shape[0] != ys.shape[0]:
        raise ConfigurationError("dataset must be xs (K, d) with ys (K,)")
    if ridge_r <= 0.0:
        raise ConfigurationError("ridge coefficient must be positive")
    n_data, d = xs.shape
    space = Space(EUCLIDEAN, d)

    def predictions(positions):
        # activations: (..., N, K); averaged over the particle axis
        act = _sigmoid(positions @ xs.T)
        return ordered_mean(act, axis=-2)

    def force(positions, theta):
        positions = np.asarray(positions, dtype=float)
        theta = np.asarray(theta, dtype=float)
        resid = predictions(positions) - ys  # (..., K)
        slope = _sigmoid(theta @ xs.T)
        slope = slope * (1.0 - slope)
        return ridge_r * theta + (resid * slope) @ xs / n_data

    def force_all(positions):
        positions = np.asarray(positions, dtype=float)
        resid = predictions(positions)[..., None, :] - ys  # (..., 1, K)
        slope = _sigmoid(positions @ xs.T)
        slope = slope * (1.0 - slope)  # (..., N, K)
        return ridge_r * positions + (resid * slope) @ xs / n_data

    def energy(positions):
        positions = np.asarray(positions, dtype=float)
        resid = predictions(positions) - ys
        ridge = 0.5 * ridge_r * ordered_mean(
            np.sum(positions * positions, axis=-1), axis=-1
        )
        return ridge + 0.5 * np.mean(resid * resid, axis=-1)

    data_scale = float(np.mean((1.0 + np.abs(ys)) * np.sum(xs * xs, axis=1)))
    curv = data_scale / (6.0 * math.sqrt(3.0))  # |sigmoid''| <= 1/(6 sqrt 3)
    mix = float(np.mean(np.sum(xs * xs, axis=1))) / 16.0
    coeffs = ModelCoefficients(
        m1x=ridge_r + curv + mix,
        m1m=mix,
        l1=ridge_r + curv + 2.0 * mix,
        lambda_growth=0.0,
        m_bnd=float(np.mean((1.0 + np.abs(ys)) * np.linalg.norm(xs, axis=1)) / 4.0)
        / math.sqrt(d),
        r_conf=ridge_r,
        k_conf=0.0,
        l_hess=ridge_r,
        c0=0.5 * ridge_r,
        c1=0.5 * ridge_r,
        r0_low=0.0,
        r1_up=0.0,
    )
    return MeanFieldModel(
        space=space,
        force=force,
        force_all=force_all,
        energy=energy,
        external_potential=lambda x: 0.5 * ridge_r * np.sum(np.atleast_1d(x) ** 2, axis=-1),
        coeffs=coeffs,
        name=f"flat_convex_regression(K={n_data}, d={d}, ridge={ridge_r})",
    )


_VARIANTS = {
    "quadratic": (quadratic_model, ("r", "s", "d")),
    "gauss_attract_repel": (gauss_attract_repel_model, ("L", "s", "r", "d")),
    "torus_trig": (torus_trig_model, ("a", "b", "d")),
    "flat_convex_regression": (flat_convex_regression_model, ("xs", "ys", "ridge_r")),
}


def make_builtin_model(spec):
    """Build a model from a JSON-style mapping ``{"variant": ..., params}``."""
    if not isinstance(spec, dict) or "variant" not in spec:
        raise ConfigurationError("model spec must be a mapping with a 'variant' key")
    variant = spec["variant"]
    if variant not in _VARIANTS:
        raise ConfigurationError(
            f"unknown model variant {variant!r}; expected one of {sorted(_VARIANTS)}"
        )
    builder, allowed = _VARIANTS[variant]
    params = {k: v for k, v in spec.items() if k != "variant"}
    unknown = set(params) - set(allowed)
    if unknown:
        raise ConfigurationError(
            f"unknown parameter(s) {sorted(unknown)} for model variant {variant!r}"
        )
    if variant == "gauss_attract_repel" and "L" in params:
        params["big_l"] = params.pop("L")
    return builder(**params)
