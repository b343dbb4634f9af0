"""One-dimensional killed diffusions: scale/speed data, boundary reports,
Class-T detection, and finite-volume discretization onto a reversible chain.

The model is ``dX = dB - q(X) dt`` on an open interval, killed at rate
``V(x) >= 0``, with generator ``u''/2 - q u'``.  Everything downstream —
classification, grids, the discretized rate matrix — is derived from the
scale density ``e^B`` and speed density ``2 e^{-B}`` with
``B(x) = 2 int_c^x q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import errors
from .expr import compile_expression, probe_finite
from .feller import BoundaryClass, BoundaryReport, boundary_report
from .spectral import (
    ReversibleGenerator, QsdVector, _as_mask,
    principal_eigenpair, qsd, resolvent, validate_generator,
)

GAUSS16_NODES, GAUSS16_WEIGHTS = np.polynomial.legendre.leggauss(16)
GAUSS8_NODES, GAUSS8_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=np.float64))


@dataclass(frozen=True)
class Diffusion1D:
    """Drift/killing pair on an open interval, with an interior anchor point.

    ``drift`` and ``kill`` must be finite on compact subintervals; endpoint
    singularities are fine.  ``drift_source``/``kill_source`` optionally carry
    scalar python source for the jit path-simulation lane.
    """

    left: float
    right: float
    drift: object
    kill: object
    anchor: float
    drift_text: str | None = None
    kill_text: str | None = None
    drift_source: str | None = None
    kill_source: str | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.left < self.anchor < self.right:
            raise errors.ConfigParse(
                f"anchor {self.anchor:g} not inside ({self.left:g}, {self.right:g})"
            )

    @classmethod
    def from_callables(cls, interval, drift, kill=None, anchor=None, **kw):
        left, right = float(interval[0]), float(interval[1])
        if not left < right:
            raise errors.ConfigParse(f"empty interval ({left:g}, {right:g})")
        if anchor is None:
            anchor = _default_anchor(left, right)
        return cls(left=left, right=right, drift=drift,
                   kill=kill if kill is not None else _zero,
                   anchor=float(anchor), **kw)

    @classmethod
    def from_expressions(cls, interval, drift: str, kill: str | None = None, anchor=None):
        left, right = _parse_endpoint(interval[0]), _parse_endpoint(interval[1])
        if not left < right:
            raise errors.ConfigParse(f"empty interval ({left:g}, {right:g})")
        if anchor is None:
            anchor = _default_anchor(left, right)
        probes = _probe_points(left, right, float(anchor), 33)
        dfn = compile_expression(drift)
        probe_finite(dfn, probes, "drift")
        if kill is not None:
            kfn = compile_expression(kill)
            probe_finite(kfn, probes, "killing")
            kv = kfn(probes)
            if np.any(kv < 0):
                raise errors.ConfigParse(
                    f"killing rate negative at x={probes[np.argmin(kv)]:g}"
                )
        else:
            kfn = None
        return cls(
            left=left, right=right,
            drift=dfn, kill=kfn if kfn is not None else _zero,
            anchor=float(anchor),
            drift_text=drift, kill_text=kill,
            drift_source=dfn.scalar_source,
            kill_source=kfn.scalar_source if kfn is not None else "def _f(x):\n    return 0.0",
        )

    @classmethod
    def from_json(cls, payload: dict):
        try:
            interval = payload["interval"]
            drift = payload["drift"]
        except (KeyError, TypeError) as exc:
            raise errors.ConfigParse(f"diffusion payload missing field: {exc}") from exc
        return cls.from_expressions(
            interval=(interval[0], interval[1]),
            drift=drift,
            kill=payload.get("killing"),
            anchor=payload.get("anchor"),
        )


def _parse_endpoint(v) -> float:
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "+inf", "infinity"):
            return math.inf
        if s == "-inf" or s == "-infinity":
            return -math.inf
        try:
            return float(s)
        except ValueError as exc:
            raise errors.ConfigParse(f"bad interval endpoint {v!r}") from exc
    return float(v)


def _default_anchor(left: float, right: float) -> float:
    if math.isfinite(left) and math.isfinite(right):
        return 0.5 * (left + right)
    if math.isfinite(left):
        return left + 1.0
    if math.isfinite(right):
        return right - 1.0
    return 0.0


def _probe_points(left: float, right: float, anchor: float, k: int) -> np.ndarray:
    """Interior probe set: linear on bounded intervals, geometric toward
    infinite ends, always excluding the endpoints themselves."""
    if math.isfinite(left) and math.isfinite(right):
        pad = 1e-3 * (right - left)
        return np.linspace(left + pad, right - pad, k)
    pts = [anchor]
    spread = np.geomspace(1e-3, 8.0, (k - 1) // 2)
    for s in spread:
        lo = anchor - s if not math.isfinite(left) else max(anchor - s, left + 1e-3 * min(1.0, anchor - left))
        hi = anchor + s if not math.isfinite(right) else min(anchor + s, right - 1e-3 * min(1.0, right - anchor))
        pts.extend((lo, hi))
    return np.unique(np.asarray(pts, dtype=np.float64))


# ---------------------------------------------------------------------------
# scale function and speed density
# ---------------------------------------------------------------------------

class ScaleSpeed:
    """Scale/speed representation of the generator on compact subintervals.

    ``B`` integrates ``2 q`` cumulatively from the anchor with per-gap
    Gauss-Legendre panels over the sorted evaluation points; ``s`` layers a
    second cumulative pass over ``e^B``.  Endpoint singularities are handled
    upstream (classification) — these evaluators are for strictly interior
    points, where q is finite by the type contract.
    """

    def __init__(self, d: Diffusion1D):
        self.d = d
        self.anchor = d.anchor

    def _cumulative(self, fn, pts: np.ndarray) -> np.ndarray:
        """Cumulative integral of ``fn`` from the anchor at each point."""
        pts = np.atleast_1d(np.asarray(pts, dtype=np.float64))
        allpts = np.append(pts, self.anchor)
        order = np.argsort(allpts)
        sorted_pts = allpts[order]
        gaps_lo, gaps_hi = sorted_pts[:-1], sorted_pts[1:]
        half = 0.5 * (gaps_hi - gaps_lo)
        mid = 0.5 * (gaps_hi + gaps_lo)
        nodes = mid[:, None] + half[:, None] * GAUSS16_NODES[None, :]
        with np.errstate(all="ignore"):
            vals = fn(nodes.ravel()).reshape(nodes.shape)
        if not np.all(np.isfinite(vals)):
            bad = nodes.ravel()[~np.isfinite(vals.ravel())][0]
            raise errors.QuadratureFailure(f"integrand not finite at x={bad:g}")
        per_gap = (vals * GAUSS16_WEIGHTS[None, :]).sum(axis=1) * half
        cum_sorted = np.concatenate(([0.0], np.cumsum(per_gap)))
        anchor_pos = int(np.searchsorted(sorted_pts, self.anchor))
        cum_sorted -= cum_sorted[anchor_pos]
        out = np.empty_like(cum_sorted)
        out[order] = cum_sorted
        return out[:-1]

    def B(self, pts) -> np.ndarray:
        return self._cumulative(lambda x: 2.0 * np.asarray(self.d.drift(x), dtype=np.float64), pts)

    def s(self, pts) -> np.ndarray:
        return self._cumulative(lambda x: np.exp(self.B(x)), pts)

    def sprime(self, pts) -> np.ndarray:
        return np.exp(self.B(pts))

    def mdens(self, pts) -> np.ndarray:
        return 2.0 * np.exp(-self.B(pts))


def scale_speed_from_drift(d: Diffusion1D) -> ScaleSpeed:
    """Build the scale/speed pair and verify the generator identity.

    The identity ``u''/2 - q u' = (1/mdens) d/dx ((1/s') du/dx)`` is checked
    on u(x)=x and u(x)=x^2 at five interior probes by central differences.
    """
    ss = d._cache.get("scale_speed")
    if ss is not None:
        return ss
    ss = ScaleSpeed(d)
    probes = _probe_points(d.left, d.right, d.anchor, 5)[:5]
    with np.errstate(all="ignore"):
        qv = np.asarray(d.drift(probes), dtype=np.float64)
    if not np.all(np.isfinite(qv)):
        raise errors.QuadratureFailure("drift not finite at interior probe points")
    # per-probe step: the difference error scales with the endpoint distance
    # (q may be singular there) and with the local scale-density slope 2|q|
    dist = np.full_like(probes, np.inf)
    if math.isfinite(d.left):
        dist = np.minimum(dist, probes - d.left)
    if math.isfinite(d.right):
        dist = np.minimum(dist, d.right - probes)
    h = np.minimum(1e-4 * np.minimum(dist, np.maximum(1.0, np.abs(probes))),
                   1e-3 / (2.0 * np.abs(qv) + 1.0))
    # strong drifts overflow e^{B} at far-out probes; check the identity only
    # where the scale and speed densities are representable
    with np.errstate(all="ignore"):
        bvals = ss.B(probes)
    keep = np.isfinite(bvals) & (np.abs(bvals) < 300.0)
    if np.count_nonzero(keep) < 2:
        raise errors.QuadratureFailure(
            "scale density overflows at every probe point; drift grows too fast"
        )
    probes, h, qv = probes[keep], h[keep], qv[keep]
    sp_plus, sp_minus = ss.sprime(probes + h), ss.sprime(probes - h)
    md = ss.mdens(probes)
    for u_prime, target in ((lambda x: np.ones_like(x), -qv),
                            (lambda x: 2.0 * x, 1.0 - 2.0 * qv * probes)):
        flux_plus = u_prime(probes + h) / sp_plus
        flux_minus = u_prime(probes - h) / sp_minus
        got = (flux_plus - flux_minus) / (2.0 * h) / md
        err = np.max(np.abs(got - target) / np.maximum(1.0, np.abs(target)))
        if err > 1e-6:
            raise errors.QuadratureFailure(
                f"generator identity fails at probes (relative error {err:g})"
            )
    d._cache["scale_speed"] = ss
    return ss


# ---------------------------------------------------------------------------
# boundary classification and Class-T detection
# ---------------------------------------------------------------------------

def _side_key(d: Diffusion1D, endpoint) -> str:
    if endpoint in ("left", "right"):
        return endpoint
    e = float(endpoint)
    if e == d.left:
        return "left"
    if e == d.right:
        return "right"
    raise errors.ConfigParse(f"{endpoint!r} is neither endpoint of ({d.left:g}, {d.right:g})")


def endpoint_report(d: Diffusion1D, endpoint) -> BoundaryReport:
    side = _side_key(d, endpoint)
    cached = d._cache.get(("boundary", side))
    if cached is None:
        value = d.left if side == "left" else d.right
        cached = boundary_report(d.drift, d.anchor, value, side)
        d._cache[("boundary", side)] = cached
    return cached


def classify_boundary(d: Diffusion1D, endpoint) -> BoundaryClass:
    """Feller class of one endpoint (killing plays no role here)."""
    return endpoint_report(d, endpoint).boundary_class


@dataclass(frozen=True)
class ClassTReport:
    class_T: bool
    left: BoundaryClass
    right: BoundaryClass
    killing_present: bool
    absorbing_end_present: bool
    explosive: bool


def is_class_T(d: Diffusion1D) -> ClassTReport:
    """Tightness verdict: no natural boundary on either side.

    The ``explosive`` flag marks models where lifetimes are a.s. finite in
    the relevant sense — an attainable endpoint or nontrivial killing — which
    is the regime where a quasi-stationary distribution exists.
    """
    left = classify_boundary(d, "left")
    right = classify_boundary(d, "right")
    verdict = BoundaryClass.NATURAL not in (left, right)
    absorbing = {BoundaryClass.REGULAR, BoundaryClass.EXIT}
    has_absorbing = left in absorbing or right in absorbing
    probes = _probe_points(d.left, d.right, d.anchor, 33)
    with np.errstate(all="ignore"):
        kv = np.asarray(d.kill(probes), dtype=np.float64)
    killing = bool(np.any(kv > 0))
    return ClassTReport(
        class_T=verdict, left=left, right=right,
        killing_present=killing, absorbing_end_present=has_absorbing,
        explosive=bool(verdict and (has_absorbing or killing)),
    )


# ---------------------------------------------------------------------------
# grids and discretization
# ---------------------------------------------------------------------------

REFINE_RATIO = 1.05
TAIL_MASS = 1e-8
FALLBACK_SPAN = 50.0


@dataclass(frozen=True)
class Grid:
    """Nodes x_0 < ... < x_{n+1} with dual-cell speed masses for the n
    interior nodes, plus the boundary closure on each side."""

    nodes: np.ndarray
    cellmass: np.ndarray
    left_closure: str            # "dirichlet" | "noflux"
    right_closure: str
    left_truncated: bool = False
    right_truncated: bool = False
    left_tail_mass: float = 0.0  # speed mass beyond a truncation cutoff
    right_tail_mass: float = 0.0

    @property
    def n(self) -> int:
        return self.nodes.size - 2

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]

    def widths(self) -> np.ndarray:
        """Dual-cell widths matching the cellmass convention."""
        walls = self.cell_walls()
        return walls[1:] - walls[:-1]

    def cell_walls(self) -> np.ndarray:
        x = self.nodes
        inner = 0.5 * (x[1:-1][:-1] + x[1:-1][1:])
        lo = 0.5 * (x[0] + x[1]) if self.left_closure == "dirichlet" else x[0]
        hi = 0.5 * (x[-2] + x[-1]) if self.right_closure == "dirichlet" else x[-1]
        return np.concatenate(([lo], inner, [hi]))


def _truncation_cutoff(ss: ScaleSpeed, anchor: float, endpoint: float, tail_mass: float):
    """March the speed measure toward an infinite endpoint; return (cutoff,
    tail) with the speed mass beyond the cutoff below ``tail_mass`` of the
    accumulated total, or a fixed fallback span when the mass diverges."""
    sgn = 1.0 if endpoint > 0 else -1.0
    w = max(1.0, 0.25 * abs(anchor))
    total = 0.0
    edge = anchor
    contribs = []
    for k in range(40):
        nxt = anchor + sgn * w * (2.0 ** (k + 1) - 1.0)
        lo, hi = (edge, nxt) if sgn > 0 else (nxt, edge)
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        nodes = mid + half * GAUSS16_NODES
        with np.errstate(over="ignore"):
            vals = ss.mdens(nodes)
        block = float((vals * GAUSS16_WEIGHTS).sum() * half)
        if not math.isfinite(block):
            # speed mass divergent on this scale: no cutoff to certify
            break
        contribs.append(block)
        total += block
        prev = edge
        edge = nxt
        if k >= 2 and block < tail_mass * total and contribs[-1] < 0.5 * contribs[-2]:
            # the doubling stride can overshoot by a wide margin when the
            # density collapses fast; pull the cutoff back into this block
            ratio = contribs[-1] / contribs[-2]
            beyond = block * ratio / (1.0 - ratio)
            budget = tail_mass * total
            if block + beyond <= budget:
                return prev, block + beyond
            sub = np.linspace(lo, hi, 65)
            half_s = 0.5 * np.diff(sub)
            mid_s = 0.5 * (sub[:-1] + sub[1:])
            nodes_s = mid_s[:, None] + half_s[:, None] * GAUSS16_NODES[None, :]
            vals_s = ss.mdens(nodes_s.ravel()).reshape(nodes_s.shape)
            panel = (vals_s * GAUSS16_WEIGHTS[None, :]).sum(axis=1) * half_s
            if sgn > 0:
                # remaining mass from each sub-edge outward, decreasing in c
                rem = np.concatenate((np.cumsum(panel[::-1])[::-1], [0.0]))
                i = int(np.argmax(rem + beyond <= budget))
            else:
                rem = np.concatenate(([0.0], np.cumsum(panel)))
                ok = rem + beyond <= budget
                i = len(ok) - 1 - int(np.argmax(ok[::-1]))
            return float(sub[i]), float(rem[i] + beyond)
    return anchor + sgn * w * FALLBACK_SPAN, math.inf


def build_grid(d: Diffusion1D, n: int, uniform: bool = False,
               tail_mass: float = TAIL_MASS, cutoff_scale: float = 1.0) -> Grid:
    """Lay out n interior nodes with closures chosen from the boundary classes.

    Regular/Exit endpoints get an absorbing (Dirichlet) wall — at the endpoint
    itself when finite, at a speed-mass cutoff otherwise.  Entrance endpoints
    get a reflecting (no-flux) wall; infinite ones are truncated where the
    speed-measure tail falls below ``tail_mass`` relative.  ``cutoff_scale``
    stretches truncation cutoffs for sensitivity checks.
    """
    if n < 8:
        raise errors.GridTooCoarse(f"need at least 8 interior nodes, got {n}")
    ss = scale_speed_from_drift(d)
    closures, bounds, truncated, tails = [], [], [], []
    for side, endpoint in (("left", d.left), ("right", d.right)):
        cls = classify_boundary(d, side)
        absorbing = cls in (BoundaryClass.REGULAR, BoundaryClass.EXIT)
        closures.append("dirichlet" if absorbing else "noflux")
        if math.isfinite(endpoint):
            bounds.append(endpoint)
            truncated.append(False)
            tails.append(0.0)
        else:
            cut, tail = _truncation_cutoff(ss, d.anchor, endpoint, tail_mass)
            cut = d.anchor + cutoff_scale * (cut - d.anchor)
            bounds.append(cut)
            truncated.append(True)
            tails.append(tail)
    lo, hi = bounds[0], bounds[1]

    weights = np.ones(n + 1)
    depth = min(40, (n + 1) // 3)
    j = np.arange(n + 1, dtype=np.float64)
    if not uniform:
        if closures[0] == "dirichlet":
            weights *= REFINE_RATIO ** -np.maximum(0.0, depth - j)
        if closures[1] == "dirichlet":
            weights *= REFINE_RATIO ** -np.maximum(0.0, depth - (n - j))
    nodes = lo + np.concatenate(([0.0], np.cumsum(weights))) / weights.sum() * (hi - lo)
    nodes[-1] = hi

    grid = Grid(nodes=nodes, cellmass=np.empty(n),
                left_closure=closures[0], right_closure=closures[1],
                left_truncated=truncated[0], right_truncated=truncated[1],
                left_tail_mass=tails[0], right_tail_mass=tails[1])
    walls = grid.cell_walls()
    half = 0.5 * (walls[1:] - walls[:-1])
    mid = 0.5 * (walls[1:] + walls[:-1])
    qnodes = mid[:, None] + half[:, None] * GAUSS8_NODES[None, :]
    mvals = ss.mdens(qnodes.ravel()).reshape(qnodes.shape)
    cellmass = (mvals * GAUSS8_WEIGHTS[None, :]).sum(axis=1) * half
    if np.any(cellmass <= 0):
        raise errors.GridTooCoarse("speed-measure cell mass vanished; refine the grid")
    object.__setattr__(grid, "cellmass", cellmass)
    return grid


def discretize(d: Diffusion1D, grid: Grid) -> ReversibleGenerator:
    """Finite-volume rate matrix on the grid's interior nodes.

    Conductance between neighbours i, i+1 is 1/(scale increment); rates are
    conductance over cell mass, so detailed balance with respect to the cell
    masses holds by construction.  A Dirichlet wall contributes its boundary
    conductance to the killing vector, as does the killing rate V at nodes.
    """
    n = grid.n
    if n < 8:
        raise errors.GridTooCoarse(f"need at least 8 interior nodes, got {n}")
    for side in ("left", "right"):
        closure = getattr(grid, f"{side}_closure")
        cls = classify_boundary(d, side)
        if closure == "dirichlet" and cls is BoundaryClass.ENTRANCE:
            raise errors.InvalidBoundaryClosure(
                f"{side} endpoint is an entrance boundary; it cannot absorb"
            )
    ss = scale_speed_from_drift(d)
    x = grid.nodes
    interior = grid.interior

    # scale increments over each gap the flux crosses
    gaps_lo = x[:-1].copy()
    gaps_hi = x[1:].copy()
    half = 0.5 * (gaps_hi - gaps_lo)
    mid = 0.5 * (gaps_hi + gaps_lo)
    qnodes = mid[:, None] + half[:, None] * GAUSS16_NODES[None, :]
    b_at = ss.B(qnodes.ravel()).reshape(qnodes.shape)
    ds = (np.exp(b_at) * GAUSS16_WEIGHTS[None, :]).sum(axis=1) * half  # n+1 gaps

    with np.errstate(all="ignore"):
        v_at = np.asarray(d.kill(interior), dtype=np.float64)
    if not np.all(np.isfinite(v_at)):
        raise errors.ConfigParse("killing rate not finite at a grid node")
    if np.any(v_at < 0):
        raise errors.ConfigParse("killing rate negative at a grid node")

    m = grid.cellmass
    Q = np.zeros((n, n))
    idx = np.arange(n - 1)
    cond = 1.0 / ds[1:-1]                      # conductance between interior neighbours
    Q[idx, idx + 1] = cond / m[:-1]
    Q[idx + 1, idx] = cond / m[1:]
    kill = v_at.copy()
    if grid.left_closure == "dirichlet":
        kill[0] += 1.0 / (ds[0] * m[0])
    if grid.right_closure == "dirichlet":
        kill[-1] += 1.0 / (ds[-1] * m[-1])
    np.fill_diagonal(Q, -(Q.sum(axis=1) + kill))
    return validate_generator(Q, m)


# ---------------------------------------------------------------------------
# tightness and the QSD density
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TightnessProfile:
    vector: np.ndarray
    sup: float


def tightness_profile(g: ReversibleGenerator, K) -> TightnessProfile:
    """Resolvent mass escaping a state subset: (I - Q)^{-1} 1_{K^c}.

    Small sup over a growing family of K certifies the tightness half of the
    Class-T property on the discretized model.
    """
    mask = _as_mask(K, g.n)
    vec = resolvent(g, 1.0, (~mask).astype(np.float64))
    return TightnessProfile(vector=vec, sup=float(np.max(vec)))


@dataclass(frozen=True)
class QsdDensity:
    x: np.ndarray
    density: np.ndarray
    nu: QsdVector
    lambda0: float
    phi0: np.ndarray
    grid: Grid
    generator: ReversibleGenerator


def qsd_density(d: Diffusion1D, grid: Grid) -> QsdDensity:
    """Quasi-stationary density on the grid: phi0 * mdens, normalized.

    Gated on the Class-T verdict and the explosive flag — without both the
    theory gives no quasi-stationary distribution to compute.
    """
    report = is_class_T(d)
    if not report.class_T:
        raise errors.NotClassT(
            f"natural boundary present (left={report.left.value}, right={report.right.value})"
        )
    if not report.explosive:
        raise errors.NotExplosive(
            "no killing and no attainable endpoint: lifetimes are infinite"
        )
    g = discretize(d, grid)
    eig = principal_eigenpair(g)
    nu = qsd(g)
    ss = scale_speed_from_drift(d)
    mdens = ss.mdens(grid.interior)
    norm = float(np.dot(eig.phi0, g.m))
    return QsdDensity(
        x=grid.interior.copy(),
        density=eig.phi0 * mdens / norm,
        nu=nu,
        lambda0=eig.lambda0,
        phi0=eig.phi0,
        grid=grid,
        generator=g,
    )
