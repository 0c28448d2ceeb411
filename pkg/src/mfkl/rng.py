"""Deterministic random number streams.

All randomness in mfkl flows through :class:`RngStream`, a thin layer over
the Philox 4x64 counter-based generator (numpy implementation) with a
fixed 128-bit key ``(seed, 0)`` and counter starting at zero.  Standard
normals are produced by the Box-Muller transform on 53-bit uniforms, so the
exact byte stream is pinned down by this module alone and can be reproduced
by an independent implementation:

* raw words: Philox4x64 outputs taken in counter order;
* uniform in [0, 1): ``(word >> 11) * 2**-53``;
* normals: for each uniform pair (u1, u2), with ``g = 1 - u1`` in (0, 1],
  emit ``sqrt(-2 ln g) cos(2 pi u2)`` then ``sqrt(-2 ln g) sin(2 pi u2)``.

An unconsumed second member of a Box-Muller pair is carried over to the
next request, so splitting one request for ``n`` normals into several
smaller requests yields the identical sequence.

Substream derivation uses the SplitMix64 output function: child ``k`` of a
stream seeded with ``s`` is seeded with ``mix64(s + (k+1) * GOLDEN)``,
which is the ``(k+1)``-th output of the SplitMix64 sequence started at
``s``.
"""

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = 0xFFFFFFFFFFFFFFFF

# salt applied before deriving per-particle substreams, so that particle
# substreams never collide with replica substreams of the same master seed
PARTICLE_SALT = 0x632BE59BD9B4E019


def mix64(x):
    """SplitMix64 finalizer: a documented 64-bit mixing function."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(master_seed, index):
    """Child seed ``index`` of ``master_seed`` (replica/worker derivation)."""
    if index < 0:
        raise ValueError("substream index must be nonnegative")
    return mix64((int(master_seed) + (index + 1) * GOLDEN) & _MASK64)


class RngStream:
    """Sequential stream of uniforms/normals from a keyed Philox generator."""

    def __init__(self, seed):
        seed = int(seed)
        if not 0 <= seed <= _MASK64:
            raise ValueError("seed must fit in 64 bits")
        self.seed = seed
        self._bits = np.random.Philox(key=seed)
        self._spare = None

    def raw(self, n):
        """Next ``n`` raw 64-bit words."""
        return self._bits.random_raw(n)

    def uniforms(self, n):
        """Next ``n`` uniforms in [0, 1) with 53-bit resolution."""
        return (self.raw(n) >> np.uint64(11)) * 2.0 ** -53

    def normals(self, n):
        """Next ``n`` standard normals (Box-Muller, with pair carry)."""
        out = np.empty(n)
        filled = 0
        if self._spare is not None and n > 0:
            out[0] = self._spare
            self._spare = None
            filled = 1
        remaining = n - filled
        if remaining > 0:
            pairs = (remaining + 1) // 2
            u = self.uniforms(2 * pairs)
            g = 1.0 - u[0::2]  # in (0, 1], keeps log finite
            radius = np.sqrt(-2.0 * np.log(g))
            angle = 2.0 * np.pi * u[1::2]
            z = np.empty(2 * pairs)
            z[0::2] = radius * np.cos(angle)
            z[1::2] = radius * np.sin(angle)
            out[filled:] = z[:remaining]
            if 2 * pairs > remaining:
                self._spare = z[-1]
        return out

    def normal_matrix(self, shape):
        """Normals filled in row-major order (particle-major, coordinate-minor)."""
        size = int(np.prod(shape))
        return self.normals(size).reshape(shape)

    def derive(self, index):
        """Independent child stream (used for replicas and workers)."""
        return RngStream(derive_seed(self.seed, index))


class PerParticleStreams:
    """Noise source with one substream per particle rank.

    Row ``i`` of every requested matrix is drawn from the substream of
    ``ranks[i]``, so relabeling particles together with their ranks permutes
    the generated noise identically.  Used to check exchangeability of the
    chain; the default sampler is the sequential :class:`RngStream`.
    """

    def __init__(self, master_seed, ranks):
        self.ranks = list(ranks)
        self.streams = [
            RngStream(derive_seed(int(master_seed) ^ PARTICLE_SALT, r))
            for r in self.ranks
        ]

    def normal_matrix(self, shape):
        n_rows, n_cols = shape
        if n_rows != len(self.streams):
            raise ValueError("row count does not match number of particle streams")
        return np.stack([s.normals(n_cols) for s in self.streams])
