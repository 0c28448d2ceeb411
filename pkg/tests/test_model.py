import math

import numpy as np
import pytest

import mfkl as m
from mfkl import (
    CapabilityError,
    ConfigurationError,
    ModelCoefficients,
    NumericalDomainError,
    ParticleState,
    Space,
)


def euclid(d=1):
    return Space("euclidean", d)


class TestSpace:
    def test_validation(self):
        with pytest.raises(ConfigurationError):
            Space("weird", 1)
        with pytest.raises(ConfigurationError):
            Space("torus", 0)

    def test_wrap_and_min_image(self):
        torus = Space("torus", 2)
        wrapped = torus.wrap(np.array([[1.25, -0.25]]))
        assert np.allclose(wrapped, [[0.25, 0.75]])
        # representative lives in (-1/2, 1/2]
        delta = np.array([0.5, -0.5, 0.3, -0.3, 1.6])
        image = torus.min_image(delta)
        assert np.allclose(image, [0.5, 0.5, 0.3, -0.3, -0.4])
        flat = euclid(2)
        same = np.array([[1.25, -0.25]])
        assert np.array_equal(flat.wrap(same), same)


class TestParticleState:
    def test_shape_mismatch(self):
        with pytest.raises(ConfigurationError):
            ParticleState(np.zeros((2, 1)), np.zeros((3, 1)), euclid())

    def test_torus_range(self):
        with pytest.raises(ConfigurationError):
            ParticleState(np.array([[1.0]]), np.zeros((1, 1)), Space("torus", 1))

    def test_non_finite(self):
        with pytest.raises(NumericalDomainError):
            ParticleState(np.array([[np.nan]]), np.zeros((1, 1)), euclid())

    def test_readonly_view(self):
        state = ParticleState(np.zeros((2, 1)), np.zeros((2, 1)), euclid())
        view = state.readonly_view()
        with pytest.raises(ValueError):
            view.positions[0, 0] = 1.0


class TestCoefficients:
    def test_ordering_constraints(self):
        with pytest.raises(ConfigurationError):
            ModelCoefficients(c0=2.0, c1=1.0)
        with pytest.raises(ConfigurationError):
            ModelCoefficients(r0_low=1.0, r1_up=0.5)

    def test_l1_consistency(self):
        with pytest.raises(ConfigurationError):
            ModelCoefficients(m1x=1.0, m1m=1.0, l1=3.0)
        ModelCoefficients(m1x=1.0, m1m=1.0, l1=2.0)

    def test_negative_rejected(self):
        with pytest.raises(ConfigurationError):
            ModelCoefficients(df_sup=-1.0)

    def test_require_names_missing(self):
        with pytest.raises(CapabilityError, match="df_sup"):
            ModelCoefficients().require("df_sup")


class TestGradient:
    def test_pairwise_hand_example(self):
        # V(x) = x^2/2, W(x,y) = (x-y)^2, N=2, x=(1,-1):
        # row i = x_i + (1/N) sum_j 2 (x_i - x_j) = (3, -3)
        model = m.pairwise_model(
            euclid(),
            grad_v=lambda x: x,
            grad_w=lambda x, y: 2.0 * (x - y),
            v=lambda x: 0.5 * np.sum(x * x, axis=-1),
            w=lambda x, y: np.sum((x - y) ** 2, axis=-1),
        )
        grad = m.potential_gradient(model, np.array([[1.0], [-1.0]]))
        assert np.allclose(grad, [[3.0], [-3.0]])

    def test_zero_force_model(self):
        model = m.pairwise_model(
            euclid(),
            grad_v=lambda x: np.zeros_like(x),
            grad_w=lambda x, y: np.zeros_like(x),
        )
        grad = m.potential_gradient(model, np.linspace(-1, 1, 5)[:, None])
        assert np.array_equal(grad, np.zeros((5, 1)))

    def test_quadratic_closed_form(self):
        model = m.quadratic_model(1.0, 0.25)
        grad = m.potential_gradient(model, np.array([[0.0], [1.0], [2.0]]))
        assert np.allclose(grad, [[-0.5], [1.0], [2.5]], atol=1e-14)

    def test_non_finite_force_names_particle(self):
        def bad_force_all(positions):
            out = np.array(positions)
            out[1] = np.nan
            return out

        model = m.MeanFieldModel(space=euclid(), force=None, force_all=bad_force_all)
        with pytest.raises(NumericalDomainError, match="particle index \\(1,\\)"):
            m.potential_gradient(model, np.zeros((3, 1)))

    def test_rows_match_per_particle_force_bitwise(self):
        rng = m.RngStream(17)
        for model in (
            m.quadratic_model(1.0, 0.3, d=2),
            m.gauss_attract_repel_model(1.0, 0.1, 1.0, d=2),
            m.torus_trig_model(0.3, 0.2, d=2),
        ):
            if model.space.is_torus:
                x = rng.uniforms(12).reshape(6, 2)
            else:
                x = rng.normal_matrix((6, 2))
            batch = m.potential_gradient(model, x)
            rows = np.stack([model.force(x, x[i]) for i in range(6)])
            assert np.array_equal(batch, rows), model.name


class TestPotential:
    def test_quadratic_no_interaction(self):
        model = m.quadratic_model(1.0, 0.0, d=1)
        value = m.system_potential(model, np.array([[1.0], [1.0]]))
        assert value == pytest.approx(1.0, abs=1e-14)

    def test_zero_configuration(self):
        model = m.quadratic_model(1.0, 0.25)
        assert m.system_potential(model, np.zeros((4, 1))) == 0.0

    def test_pairwise_double_sum(self):
        model = m.pairwise_model(
            euclid(),
            grad_v=lambda x: np.zeros_like(x),
            grad_w=lambda x, y: 2.0 * (x - y),
            v=lambda x: np.zeros(x.shape[:-1]),
            w=lambda x, y: np.sum((x - y) ** 2, axis=-1),
        )
        value = m.system_potential(model, np.array([[0.0], [2.0]]))
        assert value == pytest.approx(2.0, abs=1e-14)

    def test_energy_absent(self):
        model = m.MeanFieldModel(space=euclid(), force=lambda p, x: np.zeros_like(x))
        with pytest.raises(CapabilityError):
            m.system_potential(model, np.zeros((2, 1)))


def central_difference_gradient(model, positions, step=1e-5):
    grad = np.zeros_like(positions)
    for i in range(positions.shape[0]):
        for k in range(positions.shape[1]):
            plus = positions.copy()
            minus = positions.copy()
            plus[i, k] += step
            minus[i, k] -= step
            grad[i, k] = (
                m.system_potential(model, plus) - m.system_potential(model, minus)
            ) / (2.0 * step)
    return grad


@pytest.mark.parametrize("d", [1, 2, 3])
def test_finite_difference_consistency(d):
    rng = m.RngStream(100 + d)
    models = [
        m.quadratic_model(1.0, 0.25, d=d),
        m.gauss_attract_repel_model(0.7, 0.1, 1.0, d=d),
        m.torus_trig_model(0.3, 0.2, d=d),
    ]
    for model in models:
        for trial in range(20):
            n = 2 + trial % 4
            if model.space.is_torus:
                x = rng.uniforms(n * d).reshape(n, d)
            else:
                x = rng.normal_matrix((n, d))
            grad = m.potential_gradient(model, x)
            fd = central_difference_gradient(model, x)
            scale = max(1.0, float(np.max(np.abs(grad))))
            assert np.max(np.abs(grad - fd)) <= 1e-5 * scale, model.name


def test_finite_difference_regression_model():
    rng = m.RngStream(55)
    xs = rng.normal_matrix((6, 2))
    ys = rng.uniforms(6)
    model = m.flat_convex_regression_model(xs, ys, ridge_r=0.5)
    for _ in range(5):
        theta = rng.normal_matrix((3, 2))
        grad = m.potential_gradient(model, theta)
        fd = central_difference_gradient(model, theta)
        assert np.max(np.abs(grad - fd)) <= 1e-5 * max(1.0, float(np.max(np.abs(grad))))


def test_permutation_equivariance_bitwise():
    rng = m.RngStream(23)
    perm_rng = np.random.RandomState(4)
    for model in (
        m.quadratic_model(1.0, 0.25, d=2),
        m.gauss_attract_repel_model(1.0, 0.1, 1.0, d=2),
        m.torus_trig_model(0.3, 0.2, d=2),
    ):
        if model.space.is_torus:
            x = rng.uniforms(20).reshape(10, 2)
        else:
            x = rng.normal_matrix((10, 2))
        grad = m.potential_gradient(model, x)
        for _ in range(5):
            sigma = perm_rng.permutation(10)
            assert np.array_equal(m.potential_gradient(model, x[sigma]), grad[sigma])


def test_lambda_growth_certificate():
    # bounded part of the force stays under L sqrt(2) exp(-1/2)
    big_l, s, r = 1.3, 0.2, 1.0
    model = m.gauss_attract_repel_model(big_l, s, r, d=2)
    cap = big_l * math.sqrt(2.0) * math.exp(-0.5)
    assert model.coeffs.m_bnd == pytest.approx(cap)
    rng = m.RngStream(61)
    for _ in range(100):
        x = 2.0 * rng.normal_matrix((7, 2))
        y = 2.0 * rng.normals(2)
        force = model.force(x, y)
        linear = r * y + 2.0 * s * (y - np.sort(x, axis=0).sum(axis=0) / 7)
        assert np.linalg.norm(force - linear) <= cap + 1e-12


class TestBuiltinFactory:
    def test_quadratic_example(self):
        model = m.make_builtin_model({"variant": "quadratic", "r": 1.0, "s": 0.25})
        grad = m.potential_gradient(model, np.array([[0.0], [1.0], [2.0]]))
        assert np.allclose(grad, [[-0.5], [1.0], [2.5]])
        assert model.coeffs.lambda_growth == pytest.approx(0.5)

    def test_single_particle_gauss_force_is_confinement(self):
        model = m.make_builtin_model(
            {"variant": "gauss_attract_repel", "L": 1.0, "s": 0.0, "r": 1.0}
        )
        x = np.array([[0.7]])
        assert np.array_equal(m.potential_gradient(model, x), x)

    def test_torus_trig_df_sup(self):
        model = m.make_builtin_model({"variant": "torus_trig", "a": 0.3, "b": 0.2, "d": 2})
        cap = 2.0 * math.pi * 0.5 * math.sqrt(2.0)
        assert model.coeffs.df_sup == pytest.approx(cap)
        assert model.coeffs.df_sup == pytest.approx(4.4429, abs=1e-4)
        # numerical sup of the force over a grid of states stays below the cap
        rng = m.RngStream(8)
        sup = 0.0
        for _ in range(50):
            x = rng.uniforms(10).reshape(5, 2)
            y = rng.uniforms(2)
            sup = max(sup, float(np.linalg.norm(model.force(x, y))))
        assert sup <= cap + 1e-12

    def test_invalid_parameters(self):
        with pytest.raises(ConfigurationError):
            m.make_builtin_model({"variant": "quadratic", "r": -1.0, "s": 0.0})
        with pytest.raises(ConfigurationError):
            m.make_builtin_model({"variant": "unknown_kind"})
        with pytest.raises(ConfigurationError):
            m.make_builtin_model({"variant": "quadratic", "r": 1.0, "bogus": 2})


def test_torus_positions_stay_canonical(torus_model):
    rng = m.RngStream(3)
    state = m.ParticleState(
        rng.uniforms(8).reshape(8, 1), 3.0 * rng.normal_matrix((8, 1)), torus_model.space
    )
    new = m.verlet_step(torus_model, state, 0.3)
    assert (new.positions >= 0.0).all() and (new.positions < 1.0).all()
