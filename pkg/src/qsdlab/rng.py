"""Counter-based random numbers with per-path substreams.

Draws are pure functions of ``(seed, path, counter)``: a path's stream is a
64-bit key derived from the seed, and draw ``k`` of that stream is the
SplitMix64 finalizer applied to ``key + (k+1)*GOLDEN``.  Random access means
a path may skip draws (e.g. an unused bridge test) without shifting any other
draw, simulation order never matters, and parallel workers need no shared
state.

The same integer arithmetic is implemented twice: scalar (consumed by the
numba kernels) and vectorized over uint64 arrays (the numpy lane).  The two
produce bit-identical uint64 streams; derived floats can differ from the
numba lane by libm rounding in ``log`` only, i.e. in the far normal tails.

Uniform deviates are ``((bits >> 12) + 0.5) * 2**-52``, strictly inside
(0, 1).  Normals come from the rational inverse-CDF approximation of Wichura
(AS 241, double-precision variant), accurate to ~1e-15.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U2POW52 = 2.0**-52

# Salt separating the initial-condition stream from the path-step stream.
INIT_SALT = np.uint64(0x5851F42D4C957F2D)

# Draw slots within one time step.
DRAWS_PER_STEP = 4
SLOT_NORMAL = 0
SLOT_KILL = 1
SLOT_BRIDGE_LO = 2
SLOT_BRIDGE_HI = 3


def mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on a uint64 array (vectorized lane)."""
    with np.errstate(over="ignore"):
        z = z ^ (z >> np.uint64(30))
        z = z * _MIX1
        z = z ^ (z >> np.uint64(27))
        z = z * _MIX2
        z = z ^ (z >> np.uint64(31))
    return z


def path_keys(seed: int, paths: np.ndarray) -> np.ndarray:
    """Per-path substream keys for global path indices ``paths``."""
    p = np.asarray(paths, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(np.uint64(seed) + (p + np.uint64(1)) * GOLDEN)


def raw_draws(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """uint64 draw for each (key, counter) pair; broadcasts."""
    k = np.asarray(keys, dtype=np.uint64)
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(k + (c + np.uint64(1)) * GOLDEN)


def uniform_from_bits(bits: np.ndarray) -> np.ndarray:
    """Map uint64 bits to doubles in the open interval (0, 1).

    Uses the top 52 bits so both endpoints stay unreachable after rounding:
    the largest value is 1 - 2**-53 exactly, the smallest 2**-53.
    """
    return ((bits >> np.uint64(12)).astype(np.float64) + 0.5) * _U2POW52


def uniforms(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    return uniform_from_bits(raw_draws(keys, counters))


def step_counter(step, slot: int):
    """Draw counter for a given time step and slot."""
    return np.uint64(step) * np.uint64(DRAWS_PER_STEP) + np.uint64(slot)


def init_keys(seed: int, paths: np.ndarray) -> np.ndarray:
    """Substream keys reserved for sampling initial conditions."""
    return mix64(path_keys(seed, paths) ^ INIT_SALT)


# ---------------------------------------------------------------------------
# Inverse normal CDF, AS 241 (PPND16).  Coefficient names follow the
# published algorithm; both lanes share these tuples.
# ---------------------------------------------------------------------------

PPND_A = (
    3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
    1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
    3.3430575583588128105e4, 2.5090809287301226727e3,
)
PPND_B = (
    1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
    2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
    5.2264952788528545610e3,
)
PPND_C = (
    1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
    3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
    2.27238449892691845833e-2, 7.74545014278341407640e-4,
)
PPND_D = (
    1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
    1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
    1.05075007164441684324e-9,
)
PPND_E = (
    6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
    2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
    2.71155556874348757815e-5, 2.01033439929228813265e-7,
)
PPND_F = (
    1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
    7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
    2.04426310338993978564e-15,
)


def _poly7(c, r):
    return ((((((c[7] * r + c[6]) * r + c[5]) * r + c[4]) * r + c[3]) * r + c[2]) * r + c[1]) * r + c[0]


def normal_ppf(p: np.ndarray) -> np.ndarray:
    """Inverse standard normal CDF, vectorized; p must lie in (0, 1)."""
    p = np.asarray(p, dtype=np.float64)
    q = p - 0.5
    out = np.empty_like(p)

    central = np.abs(q) <= 0.425
    r = 0.180625 - q[central] * q[central]
    out[central] = q[central] * _poly7(PPND_A, r) / _poly7(PPND_B, r)

    tail = ~central
    qt = q[tail]
    pt = np.where(qt < 0.0, p[tail], 1.0 - p[tail])
    r = np.sqrt(-np.log(pt))
    near = r <= 5.0
    rn = r[near] - 1.6
    rf = r[~near] - 5.0
    vals = np.empty_like(r)
    vals[near] = _poly7(PPND_C, rn) / _poly7(PPND_D, rn)
    vals[~near] = _poly7(PPND_E, rf) / _poly7(PPND_F, rf)
    out[tail] = np.where(qt < 0.0, -vals, vals)
    return out


def normals(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Standard normal draw for each (key, counter) pair."""
    return normal_ppf(uniforms(keys, counters))
