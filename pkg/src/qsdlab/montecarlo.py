"""Path-level verification of quasi-stationary behaviour.

Killed diffusions are simulated with Euler-Maruyama stepping, per-step
killing by thinning, absorption at attainable (regular/exit) endpoints with
an optional Brownian-bridge crossing test, and counter-based RNG so every
estimate is a pure function of (seed, model, config).  Each estimator here
has a named spectral oracle in :mod:`qsdlab.spectral`; the test-suite
contract is three-standard-error agreement on benchmark models.

Hot loops live in :mod:`qsdlab.kernels_numba` (default) with a vectorized
fallback in :mod:`qsdlab.kernels_numpy`; see :mod:`qsdlab.backend` for the
selection rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import errors, rng, stats
from .backend import resolve_backend
from .diffusion import (
    Diffusion1D, Grid, QsdDensity, _probe_points, endpoint_report,
)
from .feller import BoundaryClass
from .kernels_numpy import ABSORBED, CENSORED, KILLED
from . import kernels_numpy
from .spectral import PrincipalEigenpair, QsdVector

MIN_SURVIVORS = 100
STEP_STABILITY = 0.1
H_TABLE_SIZE = 4001
BOOTSTRAP_RESAMPLES = 200


@dataclass(frozen=True)
class PathConfig:
    """Simulation controls; ``bridge_correction`` toggles the intra-step
    boundary-crossing test."""

    dt: float
    horizon: float
    n_paths: int
    seed: int = 0
    bridge_correction: bool = True

    def __post_init__(self):
        if not (self.dt > 0):
            raise errors.ConfigParse(f"dt must be positive, got {self.dt}")
        if not (self.horizon >= self.dt):
            raise errors.ConfigParse("horizon must cover at least one step")
        if self.n_paths < 1:
            raise errors.ConfigParse("n_paths must be at least 1")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.horizon / self.dt)))


@dataclass(frozen=True)
class PathEnsemble:
    """Simulated ensemble: statuses, lifetimes, and positions at the
    requested snapshot times.

    ``statuses`` uses the kernel codes (0 censored at the horizon, 1 killed,
    2 absorbed); censored lifetimes equal the effective horizon and are
    distinguishable from kills only by status.
    """

    config: PathConfig
    left: float
    right: float
    horizon: float              # n_steps * dt, the lattice-rounded horizon
    statuses: np.ndarray
    lifetimes: np.ndarray
    x0: np.ndarray
    xfinal: np.ndarray
    snapshot_times: tuple
    snapshots: np.ndarray       # (len(snapshot_times), n_paths), t > 0 rows
    backend: str

    @property
    def n_paths(self) -> int:
        return len(self.statuses)

    @property
    def n_killed(self) -> int:
        return int(np.count_nonzero(self.statuses == KILLED))

    @property
    def n_absorbed(self) -> int:
        return int(np.count_nonzero(self.statuses == ABSORBED))

    @property
    def n_censored(self) -> int:
        return int(np.count_nonzero(self.statuses == CENSORED))

    def alive_at(self, t: float) -> np.ndarray:
        """Boolean mask of paths with lifetime exceeding t (censored paths
        outlive the horizon by construction)."""
        if t < 0 or t > self.horizon * (1 + 1e-12):
            raise ValueError(f"t={t:g} outside [0, {self.horizon:g}]")
        return (self.statuses == CENSORED) | (self.lifetimes > t)

    def positions_at(self, t: float) -> np.ndarray:
        """Positions of the paths alive at snapshot time t (strictly inside
        the open interval)."""
        alive = self.alive_at(t)
        if t == 0.0:
            return self.x0[alive]
        for k, ts in enumerate(self.snapshot_times):
            if math.isclose(ts, t, rel_tol=1e-9, abs_tol=1e-12):
                return self.snapshots[k][alive]
        raise ValueError(f"t={t:g} was not a requested snapshot time")

    def survival_curve(self, ts: np.ndarray) -> np.ndarray:
        """Empirical survival probability at each time in ts."""
        deaths = np.sort(self.lifetimes[self.statuses != CENSORED])
        return 1.0 - np.searchsorted(deaths, ts, side="right") / self.n_paths


def _death_step_counts(ens: PathEnsemble) -> np.ndarray:
    """Deaths per step plus a trailing censored bin (bootstrap resampling unit)."""
    n_steps = ens.config.n_steps
    dead = ens.statuses != CENSORED
    steps = np.rint(ens.lifetimes[dead] / ens.config.dt).astype(np.int64)
    counts = np.bincount(steps - 1, minlength=n_steps)
    return np.append(counts, ens.n_paths - dead.sum())


def _resolve_init(d: Diffusion1D, init, cfg: PathConfig):
    """Initial positions: a point, or a QSD-on-grid to sample from."""
    ids = np.arange(cfg.n_paths, dtype=np.uint64)
    if isinstance(init, QsdDensity):
        init = (init.nu, init.grid)
    if isinstance(init, tuple) and len(init) == 2 and isinstance(init[0], QsdVector):
        nu, grid = init
        if len(nu.nu) != grid.n:
            raise errors.ConfigParse("QSD vector and grid sizes disagree")
        u = rng.uniforms(rng.init_keys(cfg.seed, ids), np.uint64(0))
        cells = np.searchsorted(np.cumsum(nu.nu), u)
        return grid.interior[np.clip(cells, 0, grid.n - 1)]
    x0 = float(init)
    if not d.left < x0 < d.right:
        raise errors.InitOutsideDomain(
            f"x0={x0:g} not inside ({d.left:g}, {d.right:g})"
        )
    return np.full(cfg.n_paths, x0, dtype=np.float64)


def _snap_steps(times: Sequence[float], cfg: PathConfig, horizon: float) -> np.ndarray:
    steps = []
    for t in times:
        if t < 0 or t > horizon * (1 + 1e-12):
            raise errors.ConfigParse(f"snapshot time {t:g} outside [0, {horizon:g}]")
        s = int(round(t / cfg.dt))
        if not math.isclose(s * cfg.dt, t, rel_tol=1e-9, abs_tol=1e-12):
            raise errors.ConfigParse(
                f"snapshot time {t:g} is not a multiple of dt={cfg.dt:g}"
            )
        steps.append(s)
    if any(b <= a for a, b in zip(steps, steps[1:])):
        raise errors.ConfigParse("snapshot times must be strictly increasing")
    return np.asarray(steps, dtype=np.int64)


def _absorbing_sides(d: Diffusion1D) -> tuple[bool, bool]:
    out = []
    for side, endpoint in (("left", d.left), ("right", d.right)):
        attainable = endpoint_report(d, side).boundary_class in (
            BoundaryClass.REGULAR, BoundaryClass.EXIT,
        )
        out.append(attainable and math.isfinite(endpoint))
    return out[0], out[1]


def simulate_killed_paths(d: Diffusion1D, init, cfg: PathConfig,
                          snapshot_times: Sequence[float] = (),
                          backend: str | None = None) -> PathEnsemble:
    """Simulate the killed diffusion; reproducible given (seed, model, cfg).

    ``init`` is a starting point or a (QsdVector, Grid) pair (a QsdDensity
    works too) to sample initial conditions from.  Raises StepTooLarge when
    ``dt * sup|q|`` over the probe set exceeds 0.1 — an unstable explicit
    step would silently bias every estimator downstream.
    """
    lane = resolve_backend(backend)
    probes = _probe_points(d.left, d.right, d.anchor, 33)
    qmax = float(np.max(np.abs(np.asarray(d.drift(probes), dtype=np.float64))))
    if cfg.dt * qmax > STEP_STABILITY:
        raise errors.StepTooLarge(
            f"dt*sup|q| = {cfg.dt * qmax:.3g} > {STEP_STABILITY}; reduce dt",
            dt=cfg.dt, sup_drift=qmax,
        )
    n_steps = cfg.n_steps
    horizon = n_steps * cfg.dt
    x0 = _resolve_init(d, init, cfg)
    snap = _snap_steps(snapshot_times, cfg, horizon)
    positive = snap > 0
    absorb_left, absorb_right = _absorbing_sides(d)

    if lane == "numba" and d.drift_source is not None:
        from . import kernels_numba

        status, lifetime, xfinal, snaps_pos = kernels_numba.killed_paths(
            cfg.seed, 0, x0, cfg.dt, n_steps, d.left, d.right,
            absorb_left, absorb_right, cfg.bridge_correction, snap[positive],
            d.drift_source, d.kill_source or "def _f(x):\n    return 0.0",
        )
    else:
        lane = "numpy"
        status, lifetime, xfinal, snaps_pos = kernels_numpy.killed_paths(
            cfg.seed, np.uint64(0), x0, cfg.dt, n_steps, d.left, d.right,
            absorb_left, absorb_right, cfg.bridge_correction, snap[positive],
            d.drift, d.kill,
        )

    snaps = np.empty((len(snap), cfg.n_paths), dtype=np.float64)
    snaps[positive] = snaps_pos
    snaps[~positive] = x0
    return PathEnsemble(
        config=cfg, left=d.left, right=d.right, horizon=horizon,
        statuses=status, lifetimes=lifetime, x0=x0, xfinal=xfinal,
        snapshot_times=tuple(float(t) for t in snapshot_times),
        snapshots=snaps, backend=lane,
    )


@dataclass(frozen=True)
class ConditionalLaw:
    """Normalized histogram of survivors with multinomial standard errors."""

    t: float
    edges: np.ndarray
    counts: np.ndarray
    probs: np.ndarray
    stderr: np.ndarray
    n_alive: int
    n_outside: int   # survivors beyond the bin range (truncated grids)


def _bin_edges(bins) -> np.ndarray:
    if isinstance(bins, Grid):
        return bins.cell_walls()
    return np.asarray(bins, dtype=np.float64)


def empirical_conditional_law(ens: PathEnsemble, t: float, bins) -> ConditionalLaw:
    """Distribution of surviving paths at snapshot time t over the bins."""
    pos = ens.positions_at(t)
    if len(pos) < MIN_SURVIVORS:
        raise errors.TooFewSurvivors(
            f"{len(pos)} paths alive at t={t:g}; need {MIN_SURVIVORS}",
            alive=len(pos), t=t,
        )
    edges = _bin_edges(bins)
    counts, _ = np.histogram(pos, bins=edges)
    n = int(counts.sum())
    probs = counts / n
    stderr = np.sqrt(probs * (1.0 - probs) / n)
    return ConditionalLaw(t=t, edges=edges, counts=counts, probs=probs,
                          stderr=stderr, n_alive=len(pos),
                          n_outside=len(pos) - n)


@dataclass(frozen=True)
class RateEstimate:
    rate: float
    stderr: float
    window: tuple
    n_times: int
    survivors_at_end: int


def survival_rate_estimate(ens: PathEnsemble, window) -> RateEstimate:
    """Least-squares slope of -log(empirical survival) over the window.

    Contract: when the ensemble starts from the quasi-stationary law, the
    estimate covers the principal decay rate within three standard errors.
    The stderr is a path bootstrap (multinomial resampling of per-step death
    counts), which respects the strong dependence between survival values at
    nearby times.
    """
    t1, t2 = float(window[0]), float(window[1])
    if not (0 <= t1 < t2 <= ens.horizon * (1 + 1e-12)):
        raise errors.ConfigParse(f"window ({t1:g}, {t2:g}) outside [0, {ens.horizon:g}]")
    survivors = int(np.count_nonzero(ens.alive_at(t2)))
    if survivors < MIN_SURVIVORS:
        raise errors.TooFewSurvivors(
            f"{survivors} paths alive at window end t={t2:g}; need {MIN_SURVIVORS}",
            alive=survivors, t=t2,
        )
    dt = ens.config.dt
    steps = np.arange(max(1, math.ceil(t1 / dt - 1e-9)), math.floor(t2 / dt + 1e-9) + 1)
    ts = steps * dt

    counts = _death_step_counts(ens)
    n = ens.n_paths

    def slope_from(death_counts):
        dead_by = np.cumsum(death_counts[:-1])
        surv = (n - dead_by[steps - 1]) / n
        y = -np.log(surv)
        return np.polyfit(ts, y, 1)[0]

    rate = slope_from(counts)
    resamples = stats.bootstrap_counts(counts, BOOTSTRAP_RESAMPLES,
                                       seed=ens.config.seed ^ 0x5EED)
    boot = np.array([slope_from(r) for r in resamples])
    return RateEstimate(rate=float(rate), stderr=float(boot.std(ddof=1)),
                        window=(t1, t2), n_times=len(ts),
                        survivors_at_end=survivors)


@dataclass(frozen=True)
class YaglomEstimate:
    """Total-variation distance to the reference QSD at each time.

    ``tv_distance`` is bootstrap bias-corrected: the raw plug-in TV of a
    finite histogram is inflated by sampling noise, and the correction makes
    "distance indistinguishable from zero" actually read as zero within CI.
    Times with too few survivors report NaN instead of failing.
    """

    times: tuple
    tv_distance: np.ndarray
    ci_halfwidth: np.ndarray
    survivors: np.ndarray
    tv_raw: np.ndarray
    ensemble: PathEnsemble = field(repr=False)


def yaglom_estimate(d: Diffusion1D, x0, cfg: PathConfig, reference, times,
                    backend: str | None = None) -> YaglomEstimate:
    """Convergence of the conditional law toward the reference QSD.

    ``reference`` is a QsdDensity or (QsdVector, Grid) pair; ``x0`` is a
    starting point, or None to sample starts from the reference itself.
    """
    if isinstance(reference, QsdDensity):
        nu, grid = reference.nu, reference.grid
    else:
        nu, grid = reference
    times = tuple(float(t) for t in times)
    if any(b <= a for a, b in zip(times, times[1:])):
        raise errors.ConfigParse("times must be strictly increasing")
    init = x0 if x0 is not None else (nu, grid)
    ens = simulate_killed_paths(d, init, cfg, snapshot_times=times, backend=backend)

    edges = grid.cell_walls()
    ref = nu.nu
    tv = np.full(len(times), np.nan)
    ci = np.full(len(times), np.nan)
    raw = np.full(len(times), np.nan)
    survivors = np.zeros(len(times), dtype=np.int64)
    for k, t in enumerate(times):
        pos = ens.positions_at(t)
        survivors[k] = len(pos)
        if len(pos) < MIN_SURVIVORS:
            continue
        counts, _ = np.histogram(pos, bins=edges)
        if counts.sum() == 0:
            continue
        emp = counts / counts.sum()
        raw[k] = stats.tv_distance(emp, ref)
        boot = stats.bootstrap_counts(counts, BOOTSTRAP_RESAMPLES,
                                      seed=cfg.seed ^ (0xA610 + k))
        boot_emp = boot / boot.sum(axis=1, keepdims=True)
        tv_to_emp = 0.5 * np.abs(boot_emp - emp).sum(axis=1)   # noise level
        tv_to_ref = 0.5 * np.abs(boot_emp - ref).sum(axis=1)
        tv[k] = max(0.0, raw[k] - float(tv_to_emp.mean()))
        ci[k] = 1.96 * float(tv_to_ref.std(ddof=1))
    return YaglomEstimate(times=times, tv_distance=tv, ci_halfwidth=ci,
                          survivors=survivors, tv_raw=raw, ensemble=ens)


@dataclass(frozen=True)
class OccupationHistogram:
    """Time-average occupation of the ground-state transformed process."""

    edges: np.ndarray
    counts: np.ndarray
    probs: np.ndarray
    density: np.ndarray
    n_records: int
    n_paths: int
    stride_time: float
    burn_in: float


def _h_drift_table(d: Diffusion1D, phi0: np.ndarray, grid: Grid):
    """Tabulated log-derivative of the ground state for the h-process drift.

    Monotone-cubic interpolation of log(phi0) between the grid nodes; inside
    the last cell next to an absorbing endpoint the interpolant is replaced
    by the linear-vanishing asymptote 1/(x-a), which diverges inward and
    cannot trap a path against the wall.
    """
    if np.min(phi0) <= 0.0:
        raise errors.NonPositivePhi(
            "ground-state values must be strictly positive to transform",
            min_phi=float(np.min(phi0)),
        )
    nodes = grid.nodes[1:-1]
    interp = PchipInterpolator(nodes, np.log(phi0)).derivative()
    lo = grid.nodes[0] if grid.left_closure == "dirichlet" else nodes[0]
    hi = grid.nodes[-1] if grid.right_closure == "dirichlet" else nodes[-1]
    xs = np.linspace(lo, hi, H_TABLE_SIZE)
    c = np.empty(H_TABLE_SIZE)
    inside = (xs >= nodes[0]) & (xs <= nodes[-1])
    c[inside] = interp(xs[inside])
    if grid.left_closure == "dirichlet":
        wall = grid.nodes[0]
        low = xs < nodes[0]
        with np.errstate(divide="ignore"):
            c[low] = 1.0 / (xs[low] - wall)
    else:
        c[xs < nodes[0]] = interp(nodes[0])
    if grid.right_closure == "dirichlet":
        wall = grid.nodes[-1]
        high = xs > nodes[-1]
        with np.errstate(divide="ignore"):
            c[high] = 1.0 / (xs[high] - wall)
    else:
        c[xs > nodes[-1]] = interp(nodes[-1])
    c = np.nan_to_num(c, posinf=1e300, neginf=-1e300)
    return float(xs[0]), float(xs[1] - xs[0]), c


def doob_paths(d: Diffusion1D, eig, x0: float, cfg: PathConfig,
               burn_in: float | None = None, stride: int | None = None,
               backend: str | None = None) -> OccupationHistogram:
    """Occupation histogram of the ground-state transformed diffusion.

    ``eig`` ties the eigenpair to its grid: a QsdDensity or a
    (PrincipalEigenpair, Grid) pair.  The transformed drift is
    ``-q(x) + (log phi0)'(x)``; the process is conservative, so a single
    absorption event is a hard error (AbsorptionInHProcess) pointing at
    interpolation or step-size trouble rather than something to average over.
    """
    lane = resolve_backend(backend)
    if isinstance(eig, QsdDensity):
        pair = PrincipalEigenpair(eig.lambda0, eig.phi0)
        grid = eig.grid
    else:
        pair, grid = eig
    if not d.left < x0 < d.right:
        raise errors.InitOutsideDomain(f"x0={x0:g} not inside ({d.left:g}, {d.right:g})")
    table_lo, table_dx, table_c = _h_drift_table(d, pair.phi0, grid)

    if burn_in is None:
        burn_in = max(cfg.horizon / 100.0, 10 * cfg.dt)
    burn_steps = min(int(round(burn_in / cfg.dt)), cfg.n_steps - 1)
    if stride is None:
        stride = max(1, int(round(0.05 / cfg.dt)))
    x0v = np.full(cfg.n_paths, float(x0))

    # wall zones where the exact radial (Bessel) substep replaces Euler:
    # wide enough that a single Gaussian increment from outside the zone
    # essentially never reaches the wall
    zone_w = 6.0 * math.sqrt(cfg.dt)
    if math.isfinite(d.left) and math.isfinite(d.right):
        zone_w = min(zone_w, 0.25 * (d.right - d.left))
    zone_left = d.left + zone_w if grid.left_closure == "dirichlet" else -math.inf
    zone_right = d.right - zone_w if grid.right_closure == "dirichlet" else math.inf

    if lane == "numba" and d.drift_source is not None:
        from . import kernels_numba

        occ, n_absorbed, _ = kernels_numba.h_paths(
            cfg.seed, 0, x0v, cfg.dt, cfg.n_steps, burn_steps, stride,
            d.left, d.right, zone_left, zone_right,
            table_lo, table_dx, table_c, d.drift_source,
        )
    else:
        occ, n_absorbed, _ = kernels_numpy.h_paths(
            cfg.seed, np.uint64(0), x0v, cfg.dt, cfg.n_steps, burn_steps, stride,
            d.left, d.right, zone_left, zone_right,
            table_lo, table_dx, table_c, d.drift,
        )
    if n_absorbed > 0:
        raise errors.AbsorptionInHProcess(
            f"{n_absorbed} transformed paths hit the boundary; "
            "refine the grid or reduce dt",
            n_absorbed=int(n_absorbed),
        )
    edges = grid.cell_walls()
    counts, _ = np.histogram(occ.ravel(), bins=edges)
    total = int(counts.sum())
    probs = counts / max(total, 1)
    density = probs / (edges[1:] - edges[:-1])
    return OccupationHistogram(edges=edges, counts=counts, probs=probs,
                               density=density, n_records=occ.size,
                               n_paths=cfg.n_paths,
                               stride_time=stride * cfg.dt,
                               burn_in=burn_steps * cfg.dt)


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    stderr: float
    gamma: float
    censored_fraction: float
    rate_estimate: float


def exp_zeta_moment_estimate(ens: PathEnsemble, gamma: float) -> MomentEstimate:
    """Empirical mean of exp(gamma * lifetime).

    The exponential moment diverges as gamma approaches the decay rate, and
    the empirical variance explodes before that, so the request is refused
    above 0.9 of the (censoring-adjusted maximum-likelihood) rate estimate.
    Censored lifetimes enter at the horizon value, a downward bias bounded by
    the censored fraction — which is why more than 0.1% censoring is an
    error rather than a footnote.
    """
    if gamma == 0.0:
        return MomentEstimate(1.0, 0.0, 0.0, ens.n_censored / ens.n_paths, np.nan)
    deaths = ens.n_paths - ens.n_censored
    rate_hat = deaths / float(ens.lifetimes.sum()) if deaths else 0.0
    if gamma >= 0.9 * rate_hat:
        raise errors.GammaTooLarge(
            f"gamma={gamma:g} at or above 0.9 * estimated rate {rate_hat:.4g}",
            gamma=gamma, rate_estimate=rate_hat,
        )
    censored_fraction = ens.n_censored / ens.n_paths
    if censored_fraction >= 1e-3:
        raise errors.HeavyCensoring(
            f"censored fraction {censored_fraction:.3g} >= 1e-3; "
            "extend the horizon for a tail-sensitive moment",
            censored_fraction=censored_fraction,
        )
    vals = np.exp(gamma * ens.lifetimes)
    return MomentEstimate(
        value=float(vals.mean()),
        stderr=float(vals.std(ddof=1) / np.sqrt(ens.n_paths)),
        gamma=gamma,
        censored_fraction=censored_fraction,
        rate_estimate=rate_hat,
    )
