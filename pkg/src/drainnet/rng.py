"""Counter-based randomness keyed by lattice coordinates.

Every random quantity in the model (site openness, tie-break uniforms, the
auxiliary coupling fields) is a pure function of ``(seed, label, coords)``.
The function is a chained SplitMix64 finalizer, so an unbounded lattice can
be realized lazily, in any order, and reproduced exactly.
"""
from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO_M53 = 2.0 ** -53
_MASK64 = (1 << 64) - 1

# stream labels; distinct labels give independent fields
OPEN = 1
TIE = 2
COUPLE_OPEN_U = 11
COUPLE_TIE_U = 12
COUPLE_OPEN_V = 13
COUPLE_TIE_V = 14
WALK = 21


def _mix(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> _S30)
    z *= _M1
    z ^= z >> _S27
    z *= _M2
    z ^= z >> _S31
    return z


def _mix_int(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, label: int) -> int:
    """64-bit key of the field ``label`` under master ``seed``."""
    return _mix_int(_mix_int(seed) ^ ((label * 0x9E3779B97F4A7C15) & _MASK64))


def derive_seed(master: int, index: int) -> int:
    """Seed of replica ``index`` under ``master``.

    Defined as ``splitmix(splitmix(master) + (index + 1) * golden)``; replicas
    are never seeded sequentially.
    """
    return _mix_int(_mix_int(master) + (index + 1) * 0x9E3779B97F4A7C15)


def derive_seeds(master: int, count: int, start: int = 0) -> np.ndarray:
    return np.array([derive_seed(master, start + i) for i in range(count)], dtype=np.uint64)


def hash_coords(keys, coords: np.ndarray) -> np.ndarray:
    """Hash integer coordinate rows under per-row (or scalar) 64-bit keys.

    Parameters
    ----------
    keys : int or array of uint64
        Stream keys, broadcastable against the rows of ``coords``.
    coords : ndarray of int, shape (..., k)
    """
    coords = np.asarray(coords, dtype=np.int64)
    h = np.empty(coords.shape[:-1], dtype=np.uint64)
    h[...] = np.asarray(keys, dtype=np.uint64)
    for j in range(coords.shape[-1]):
        h = _mix((h ^ coords[..., j].view(np.uint64)) + _GOLDEN)
    return _mix(h)


def uniforms(keys, coords: np.ndarray) -> np.ndarray:
    """Uniform variates on (0, 1] indexed by coordinate rows."""
    h = hash_coords(keys, coords)
    return ((h >> _S11).astype(np.float64) + 1.0) * _TWO_M53


def key_array(seeds, label: int) -> np.ndarray:
    """Vectorized :func:`stream_key` over an array of seeds."""
    seeds = np.atleast_1d(np.asarray(seeds, dtype=np.uint64))
    lab = np.uint64((label * 0x9E3779B97F4A7C15) & _MASK64)
    return _mix(_mix(seeds.copy()) ^ lab)
