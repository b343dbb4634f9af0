"""Numba lane of the path-simulation kernels.

Scalar per-path loops compiled with ``@njit``, matching the numpy lane in
:mod:`qsdlab.kernels_numpy` draw for draw: the same (seed, path, counter)
triple produces the same uint64, so kill/absorb decisions and lifetimes
agree across lanes (normal deviates may differ by libm rounding of ``log``
in the far tails).

Coefficient callables cannot cross into nopython code, so kernels are built
by factories keyed on the *scalar source text* of the drift and killing
expressions: each distinct pair compiles once per process and is reused
(`functools.lru_cache`).  All RNG constants live in closure scope as typed
``np.uint64`` values — mixing a Python int into uint64 arithmetic would make
numba fall back to float64 and change the stream.
"""

from __future__ import annotations

import functools
import math

import numba
import numpy as np

from . import rng
from .kernels_numpy import ABSORBED, BRIDGE_SKIP, CENSORED, KILLED  # noqa: F401

_GOLDEN = rng.GOLDEN
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S12 = np.uint64(12)
_ONE = np.uint64(1)
_U2POW52 = 2.0**-52

_PA, _PB = rng.PPND_A, rng.PPND_B
_PC, _PD = rng.PPND_C, rng.PPND_D
_PE, _PF = rng.PPND_E, rng.PPND_F


@numba.njit(inline="always")
def _mix64(z):
    z = z ^ (z >> _S30)
    z = z * _MIX1
    z = z ^ (z >> _S27)
    z = z * _MIX2
    return z ^ (z >> _S31)


@numba.njit(inline="always")
def _uniform(key, counter):
    bits = _mix64(key + (counter + _ONE) * _GOLDEN)
    return (np.float64(bits >> _S12) + 0.5) * _U2POW52


@numba.njit(inline="always")
def _horner7(c, r):
    return ((((((c[7] * r + c[6]) * r + c[5]) * r + c[4]) * r + c[3]) * r + c[2]) * r + c[1]) * r + c[0]


@numba.njit(inline="always")
def _ppnd16(p):
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _horner7(_PA, r) / _horner7(_PB, r)
    pt = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(pt))
    if r <= 5.0:
        rn = r - 1.6
        val = _horner7(_PC, rn) / _horner7(_PD, rn)
    else:
        rf = r - 5.0
        val = _horner7(_PE, rf) / _horner7(_PF, rf)
    return -val if q < 0.0 else val


@numba.njit(inline="always")
def _normal(key, counter):
    return _ppnd16(_uniform(key, counter))


@functools.lru_cache(maxsize=128)
def _scalar_jit(src: str):
    ns: dict = {"math": math}
    exec(compile(src, "<scalar coefficient>", "exec"), ns)
    return numba.njit(ns["_f"])


@functools.lru_cache(maxsize=64)
def _killed_kernel(q_src: str, v_src: str):
    qf = _scalar_jit(q_src)
    vf = _scalar_jit(v_src)

    @numba.njit
    def run(seed, path0, x0, dt, n_steps, left, right,
            absorb_left, absorb_right, use_bridge, snap_steps):
        n_paths = x0.shape[0]
        n_snap = snap_steps.shape[0]
        status = np.zeros(n_paths, dtype=np.uint8)
        lifetime = np.full(n_paths, n_steps * dt, dtype=np.float64)
        xfinal = np.empty(n_paths, dtype=np.float64)
        snaps = np.empty((n_snap, n_paths), dtype=np.float64)
        sqdt = math.sqrt(dt)
        useed = np.uint64(seed)

        for i in range(n_paths):
            key = _mix64(useed + (np.uint64(path0) + np.uint64(i) + _ONE) * _GOLDEN)
            xi = x0[i]
            sp = 0
            for step in range(n_steps):
                u_kill = _uniform(key, np.uint64(step * rng.DRAWS_PER_STEP + rng.SLOT_KILL))
                rate = vf(xi)
                if u_kill < -math.expm1(-rate * dt):
                    status[i] = KILLED
                    lifetime[i] = (step + 1) * dt
                    break
                z = _normal(key, np.uint64(step * rng.DRAWS_PER_STEP + rng.SLOT_NORMAL))
                xn = xi - qf(xi) * dt + sqdt * z
                gone = False
                if absorb_left and xn <= left:
                    gone = True
                if absorb_right and xn >= right:
                    gone = True
                if use_bridge and not gone:
                    if absorb_left:
                        p = math.exp(-2.0 * (xi - left) * (xn - left) / dt)
                        if p >= BRIDGE_SKIP and _uniform(
                            key, np.uint64(step * rng.DRAWS_PER_STEP + rng.SLOT_BRIDGE_LO)
                        ) < p:
                            gone = True
                    if absorb_right and not gone:
                        p = math.exp(-2.0 * (right - xi) * (right - xn) / dt)
                        if p >= BRIDGE_SKIP and _uniform(
                            key, np.uint64(step * rng.DRAWS_PER_STEP + rng.SLOT_BRIDGE_HI)
                        ) < p:
                            gone = True
                xi = xn
                if gone:
                    status[i] = ABSORBED
                    lifetime[i] = (step + 1) * dt
                    break
                while sp < n_snap and snap_steps[sp] == step + 1:
                    snaps[sp, i] = xi
                    sp += 1
            xfinal[i] = xi
            while sp < n_snap:
                snaps[sp, i] = xi
                sp += 1
        return status, lifetime, xfinal, snaps

    return run


def killed_paths(seed, path0, x0, dt, n_steps, left, right,
                 absorb_left, absorb_right, use_bridge, snap_steps,
                 q_src, v_src):
    """Numba-lane twin of :func:`qsdlab.kernels_numpy.killed_paths`.

    Coefficients arrive as scalar source text; the compiled kernel for each
    (drift, killing) pair is cached for the life of the process.
    """
    run = _killed_kernel(q_src, v_src)
    return run(seed, np.uint64(path0), np.ascontiguousarray(x0, dtype=np.float64),
               float(dt), int(n_steps), float(left), float(right),
               bool(absorb_left), bool(absorb_right), bool(use_bridge),
               np.ascontiguousarray(snap_steps, dtype=np.int64))


@functools.lru_cache(maxsize=64)
def _h_kernel(q_src: str):
    qf = _scalar_jit(q_src)

    @numba.njit
    def run(seed, path0, x0, dt, n_steps, burn_steps, stride,
            left, right, zone_left, zone_right, table_lo, table_dx, table_c):
        n_paths = x0.shape[0]
        n_table = table_c.shape[0]
        n_rec = (n_steps - burn_steps) // stride
        occ = np.empty((n_rec, n_paths), dtype=np.float64)
        xfinal = np.empty(n_paths, dtype=np.float64)
        n_absorbed = 0
        sqdt = math.sqrt(dt)
        useed = np.uint64(seed)

        for i in range(n_paths):
            key = _mix64(useed + (np.uint64(path0) + np.uint64(i) + _ONE) * _GOLDEN)
            xi = x0[i]
            alive = True
            rec = 0
            for step in range(n_steps):
                if alive:
                    z0 = _normal(key, np.uint64(step * rng.DRAWS_PER_STEP + rng.SLOT_NORMAL))
                    pos = (xi - table_lo) / table_dx
                    if pos < 0.0:
                        pos = 0.0
                    hi_clamp = n_table - 1.000001
                    if pos > hi_clamp:
                        pos = hi_clamp
                    j = int(pos)
                    w = pos - j
                    bh = table_c[j] * (1.0 - w) + table_c[j + 1] * w - qf(xi)
                    if xi < zone_left or xi > zone_right:
                        # wall zone: exact Bessel(3) radial step for the
                        # singular drift part (see the numpy lane docstring)
                        z2 = _normal(key, np.uint64(step * rng.DRAWS_PER_STEP + rng.SLOT_BRIDGE_LO))
                        z3 = _normal(key, np.uint64(step * rng.DRAWS_PER_STEP + rng.SLOT_BRIDGE_HI))
                        quad = dt * (z2 * z2 + z3 * z3)
                        if xi < zone_left:
                            y = xi - left
                            u = y + (bh - 1.0 / y) * dt + sqdt * z0
                            xn = left + math.sqrt(u * u + quad)
                        else:
                            y = right - xi
                            u = y + (-bh - 1.0 / y) * dt - sqdt * z0
                            xn = right - math.sqrt(u * u + quad)
                    else:
                        xn = xi + bh * dt + sqdt * z0
                    if xn <= left or xn >= right:
                        alive = False
                        n_absorbed += 1
                    else:
                        xi = xn
                if rec < n_rec and (step + 1) == burn_steps + (rec + 1) * stride:
                    occ[rec, i] = xi
                    rec += 1
            xfinal[i] = xi
        return occ, n_absorbed, xfinal

    return run


def h_paths(seed, path0, x0, dt, n_steps, burn_steps, stride,
            left, right, zone_left, zone_right, table_lo, table_dx, table_c, q_src):
    """Numba-lane twin of :func:`qsdlab.kernels_numpy.h_paths`."""
    run = _h_kernel(q_src)
    return run(seed, np.uint64(path0), np.ascontiguousarray(x0, dtype=np.float64),
               float(dt), int(n_steps), int(burn_steps), int(stride),
               float(left), float(right), float(zone_left), float(zone_right),
               float(table_lo), float(table_dx),
               np.ascontiguousarray(table_c, dtype=np.float64))
