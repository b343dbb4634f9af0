"""Vectorized numpy lane of the path-simulation kernels.

This is the reference implementation of the kernel contract: the numba lane
in :mod:`qsdlab.kernels_numba` must match it draw for draw.  Both lanes
consume the same counter-based uint64 streams, so statuses, lifetimes and
(up to libm rounding in the normal tails) positions agree across lanes.

Step semantics, shared by both lanes:

1. killing first: with rate ``v(x)`` at the step's start, the path dies with
   probability ``1 - exp(-v(x) dt)`` (slot 1 of the step's draws);
2. Euler-Maruyama move ``x += -q(x) dt + sqrt(dt) Z`` (slot 0);
3. absorption when the move lands at or beyond an absorbing endpoint;
4. optional Brownian-bridge test for an undetected crossing of an absorbing
   endpoint ``a`` between the old and new position: crossing probability
   ``exp(-2 (x-a)(x'-a) / dt)`` (slots 2/3); the draw is skipped entirely
   when that probability is below ``BRIDGE_SKIP`` — with counter-based
   streams the skip cannot shift any later draw.

Killed and absorbed paths report lifetime ``(step+1) * dt``; paths alive at
the horizon are censored at ``n_steps * dt``.
"""

from __future__ import annotations

import numpy as np

from . import rng

CENSORED = 0
KILLED = 1
ABSORBED = 2

BRIDGE_SKIP = 1e-22


def killed_paths(seed, path0, x0, dt, n_steps, left, right,
                 absorb_left, absorb_right, use_bridge, snap_steps, q, v):
    """Simulate killed/absorbed paths; returns (status, lifetime, xfinal, snaps).

    ``snaps[k, i]`` is path ``i``'s position after ``snap_steps[k]`` steps;
    entries for paths already dead hold the position at death, so consumers
    must mask by lifetime.
    """
    n_paths = x0.shape[0]
    keys = rng.path_keys(seed, path0 + np.arange(n_paths, dtype=np.uint64))
    x = x0.astype(np.float64, copy=True)
    status = np.zeros(n_paths, dtype=np.uint8)
    lifetime = np.full(n_paths, n_steps * dt, dtype=np.float64)
    snaps = np.empty((len(snap_steps), n_paths), dtype=np.float64)

    sqdt = np.sqrt(dt)
    alive = np.ones(n_paths, dtype=bool)
    snap_ptr = 0
    for step in range(n_steps):
        idx = np.nonzero(alive)[0]
        if idx.size:
            k = keys[idx]
            xs = x[idx]
            t_end = (step + 1) * dt

            u_kill = rng.uniforms(k, rng.step_counter(step, rng.SLOT_KILL))
            rate = v(xs)
            dead = u_kill < -np.expm1(-rate * dt)
            if np.any(dead):
                di = idx[dead]
                status[di] = KILLED
                lifetime[di] = t_end
                alive[di] = False
                idx, k, xs = idx[~dead], k[~dead], xs[~dead]

            if idx.size:
                z = rng.normals(k, rng.step_counter(step, rng.SLOT_NORMAL))
                xn = xs - q(xs) * dt + sqdt * z

                gone = np.zeros(idx.size, dtype=bool)
                if absorb_left:
                    gone |= xn <= left
                if absorb_right:
                    gone |= xn >= right
                if use_bridge:
                    inside = ~gone
                    if absorb_left and np.any(inside):
                        p = np.exp(-2.0 * (xs - left) * (xn - left) / dt)
                        test = inside & (p >= BRIDGE_SKIP)
                        if np.any(test):
                            u = rng.uniforms(k[test], rng.step_counter(step, rng.SLOT_BRIDGE_LO))
                            hit = np.zeros_like(test)
                            hit[test] = u < p[test]
                            gone |= hit
                            inside = ~gone
                    if absorb_right and np.any(inside):
                        p = np.exp(-2.0 * (right - xs) * (right - xn) / dt)
                        test = inside & (p >= BRIDGE_SKIP)
                        if np.any(test):
                            u = rng.uniforms(k[test], rng.step_counter(step, rng.SLOT_BRIDGE_HI))
                            hit = np.zeros_like(test)
                            hit[test] = u < p[test]
                            gone |= hit

                x[idx] = xn
                if np.any(gone):
                    gi = idx[gone]
                    status[gi] = ABSORBED
                    lifetime[gi] = t_end
                    alive[gi] = False

        while snap_ptr < len(snap_steps) and snap_steps[snap_ptr] == step + 1:
            snaps[snap_ptr] = x
            snap_ptr += 1

    return status, lifetime, x, snaps


def h_paths(seed, path0, x0, dt, n_steps, burn_steps, stride,
            left, right, zone_left, zone_right, table_lo, table_dx, table_c, q):
    """Ground-state transformed paths with tabulated log-derivative correction.

    Drift is ``-q(x) + c(x)`` where ``c`` linearly interpolates ``table_c``
    on the uniform grid ``table_lo + j * table_dx`` (clamped at the ends).
    No killing, no bridge: the transformed process is conservative and must
    never reach the boundary.

    Plain Euler cannot honor that near an absorbing wall: the drift there is
    ``1/(x-a)`` and a Gaussian increment jumps past the wall with positive
    probability regardless of the drift.  Inside the wall zones
    (``x < zone_left`` / ``x > zone_right``) the singular part is therefore
    simulated exactly: to leading order the process is Bessel(3) in the wall
    distance, which *is* the norm of a 3d Brownian motion, so the step
    ``y' = sqrt((y + r dt + sqrt(dt) Z0)^2 + dt (Z2^2 + Z3^2))`` (with ``r``
    the regular drift remainder) is strictly positive by construction.  The
    extra draws use the step's spare slots, so the lanes stay aligned.

    Positions are recorded every ``stride`` steps once ``burn_steps`` have
    passed; a path that still lands outside ``(left, right)`` — possible only
    by crossing the whole domain in one step — is frozen and counted in
    ``n_absorbed``.

    Returns (occupation records, n_absorbed, xfinal).
    """
    n_paths = x0.shape[0]
    keys = rng.path_keys(seed, path0 + np.arange(n_paths, dtype=np.uint64))
    x = x0.astype(np.float64, copy=True)
    alive = np.ones(n_paths, dtype=bool)
    n_table = table_c.shape[0]

    rec_steps = np.arange(burn_steps + stride, n_steps + 1, stride)
    occ = np.empty((len(rec_steps), n_paths), dtype=np.float64)

    sqdt = np.sqrt(dt)
    rec_ptr = 0
    for step in range(n_steps):
        idx = np.nonzero(alive)[0]
        if idx.size:
            k = keys[idx]
            xs = x[idx]
            z0 = rng.normals(k, rng.step_counter(step, rng.SLOT_NORMAL))
            pos = np.clip((xs - table_lo) / table_dx, 0.0, n_table - 1.000001)
            j = pos.astype(np.int64)
            w = pos - j
            bh = table_c[j] * (1.0 - w) + table_c[j + 1] * w - q(xs)
            xn = xs + bh * dt + sqdt * z0

            lo_zone = xs < zone_left
            hi_zone = xs > zone_right
            near = lo_zone | hi_zone
            if np.any(near):
                z2 = rng.normals(k[near], rng.step_counter(step, rng.SLOT_BRIDGE_LO))
                z3 = rng.normals(k[near], rng.step_counter(step, rng.SLOT_BRIDGE_HI))
                quad = dt * (z2 * z2 + z3 * z3)
                y = np.where(lo_zone[near], xs[near] - left, right - xs[near])
                sgn = np.where(lo_zone[near], 1.0, -1.0)
                u = y + (sgn * bh[near] - 1.0 / y) * dt + sgn * sqdt * z0[near]
                wall = np.where(lo_zone[near], left, right)
                xn[near] = wall + sgn * np.sqrt(u * u + quad)

            out = (xn <= left) | (xn >= right)
            x[idx] = np.where(out, xs, xn)
            if np.any(out):
                alive[idx[out]] = False
        if rec_ptr < len(rec_steps) and rec_steps[rec_ptr] == step + 1:
            occ[rec_ptr] = x
            rec_ptr += 1

    return occ, int(np.count_nonzero(~alive)), x
