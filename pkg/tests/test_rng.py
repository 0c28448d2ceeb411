import numpy as np
import pytest

from mfkl import PerParticleStreams, RngStream, derive_seed
from mfkl.rng import mix64


def test_same_seed_same_stream():
    a = RngStream(123456789)
    b = RngStream(123456789)
    assert np.array_equal(a.normals(1001), b.normals(1001))
    assert np.array_equal(a.uniforms(17), b.uniforms(17))


def test_chunked_normals_match_bulk():
    bulk = RngStream(7).normals(101)
    chunked = RngStream(7)
    parts = [chunked.normals(n) for n in (1, 2, 3, 50, 45)]
    assert np.array_equal(np.concatenate(parts), bulk)


def test_normal_matrix_is_row_major_fill():
    flat = RngStream(9).normals(12)
    mat = RngStream(9).normal_matrix((3, 4))
    assert np.array_equal(mat.reshape(-1), flat)


def test_uniforms_in_unit_interval():
    u = RngStream(5).uniforms(10_000)
    assert (u >= 0.0).all() and (u < 1.0).all()


def test_normals_distribution_sanity():
    z = RngStream(2718).normals(200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.var() - 1.0) < 0.02
    assert abs(np.mean(z ** 3)) < 0.05


def test_derive_seed_distinct_and_stable():
    children = [derive_seed(42, k) for k in range(64)]
    assert len(set(children)) == 64
    assert children == [derive_seed(42, k) for k in range(64)]
    with pytest.raises(ValueError):
        derive_seed(42, -1)


def test_mix64_is_a_permutation_sample():
    outs = {mix64(x) for x in range(1000)}
    assert len(outs) == 1000


def test_seed_range_validation():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(2 ** 64)


def test_per_particle_streams_permute_with_ranks():
    base = PerParticleStreams(99, ranks=range(5))
    draws = base.normal_matrix((5, 3))
    perm = [3, 0, 4, 1, 2]
    permuted = PerParticleStreams(99, ranks=perm)
    assert np.array_equal(permuted.normal_matrix((5, 3)), draws[perm])


def test_per_particle_streams_disjoint_from_replica_streams():
    particle = PerParticleStreams(1234, ranks=[0]).normal_matrix((1, 4))[0]
    replica = RngStream(derive_seed(1234, 0)).normals(4)
    assert not np.array_equal(particle, replica)
