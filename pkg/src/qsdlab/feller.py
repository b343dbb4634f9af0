"""Certified classification of one-dimensional diffusion boundaries.

For a diffusion with drift ``q`` (generator ``u'' / 2 - q u'``), each endpoint
is Regular, Exit, Entrance, or Natural according to the finiteness of two
iterated scale/speed integrals taken from an interior anchor ``c`` toward the
endpoint ``b``:

* the attainability integral ``int_c^b M((c,x]) dS(x)`` — finite iff paths
  can reach the endpoint in finite time;
* the entrance integral ``int_c^b S((c,x]) dM(x)`` — finite iff the process
  can enter from the endpoint;

where ``dS = e^B dx``, ``dM = 2 e^{-B} dx`` and ``B(x) = 2 int_c^x q``.  The
(finite, finite) -> Regular, (finite, infinite) -> Exit, (infinite, finite)
-> Entrance, (infinite, infinite) -> Natural mapping is pinned by closed-form
catalog cases in the test suite, not by convention.

Certification strategy: march geometric blocks toward the endpoint, keeping
all cumulants in log space.  Within a block, adaptive Chebyshev panels are
split until the exponent ``B`` varies by at most PANEL_MAX_SPAN, so every
exponential is evaluated relative to the panel's own reference and never
overflows.  An integral is declared infinite when its partial sum passes
DIVERGENCE_SUM or when block contributions stop decaying (the harmonic
signature), finite when contributions have collapsed below CONV_REL of the
running total, and otherwise the budget runs out and the result is reported
inconclusive with partial sums.

When ``B`` runs to +/-infinity the integral weighted by the exploding
cumulant cannot be marched directly (the panel count would scale with the
exponent range), so it is rewritten by switching the order of integration:
``int cumdens(y) * OutTail(y) dy`` with ``OutTail(y) = int_y^b outdens``.
The inner tail collapses geometrically and the outer integrand is a moderate
pointwise product of one huge and one tiny factor, combined in log space.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.polynomial import chebyshev as cheb

from . import errors

DIVERGENCE_SUM = 1e12       # partial sums beyond this declare divergence
LOG_DIV = float(np.log(DIVERGENCE_SUM))
PANEL_MAX_SPAN = 3.0        # max variation of B within one panel
CHEB_POINTS = 24
FINITE_BLOCKS = 56          # halvings toward a finite endpoint (~1e-17 relative)
INFINITE_BLOCKS = 46        # octaves toward an infinite endpoint (~1e13 absolute)
PANEL_BUDGET = 6000
CONV_REL = 1e-13            # contribution below this x total certifies finiteness
RATIO_MIN_BLOCKS = 24
RATIO_WINDOW = 8
RATIO_LO, RATIO_HI = 0.97, 1.2
FUBINI_EXP = 35.0           # |B| beyond which the direct march switches strategy
INNER_STOP_REL = 1e-16
INNER_PANEL_BUDGET = 400
LOG_INNER_DIV = float(np.log(1e15))


class BoundaryClass(Enum):
    REGULAR = "regular"
    EXIT = "exit"
    ENTRANCE = "entrance"
    NATURAL = "natural"


_CLASS_TABLE = {
    (True, True): BoundaryClass.REGULAR,
    (True, False): BoundaryClass.EXIT,
    (False, True): BoundaryClass.ENTRANCE,
    (False, False): BoundaryClass.NATURAL,
}


@dataclass(frozen=True)
class IntegralResult:
    """Verdict on one iterated scale/speed integral."""

    finite: bool
    value: float            # certified value if finite, +inf otherwise
    log_partial: float      # log of the partial sum actually accumulated
    blocks: int
    method: str             # "direct" or "reordered"


@dataclass(frozen=True)
class BoundaryReport:
    side: str               # "left" or "right"
    endpoint: float
    boundary_class: BoundaryClass
    attainability: IntegralResult
    entrance: IntegralResult


# ---------------------------------------------------------------------------
# Chebyshev panel primitives
# ---------------------------------------------------------------------------

_T = np.cos(np.pi * (2 * np.arange(CHEB_POINTS)[::-1] + 1) / (2 * CHEB_POINTS))
_DEG = CHEB_POINTS - 1


def _build_operators():
    """Precompute the panel linear algebra: from values at the Chebyshev
    nodes to (a) the cumulative integral from t=-1 at those nodes and (b) the
    full integral over [-1, 1].  One matvec each per panel."""
    vander = cheb.chebvander(_T, _DEG)
    project = np.linalg.inv(vander)             # values -> coefficients
    anti = np.empty((_DEG + 2, _DEG + 1))
    for k in range(_DEG + 1):
        e = np.zeros(_DEG + 1)
        e[k] = 1.0
        ci = cheb.chebint(e)
        ci[0] -= cheb.chebval(-1.0, ci)
        anti[:, k] = ci
    cum = cheb.chebvander(_T, _DEG + 1) @ anti @ project
    full = (cheb.chebvander(np.array([1.0]), _DEG + 1) @ anti @ project)[0]
    return cum, full


_CUM, _INT = _build_operators()


def _eval_q(q, x: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        vals = np.asarray(q(x), dtype=np.float64)
    if vals.shape != x.shape:
        vals = np.broadcast_to(vals, x.shape).astype(np.float64)
    if not np.all(np.isfinite(vals)):
        bad = x[~np.isfinite(vals)][0]
        raise errors.QuadratureFailure(f"drift not finite at interior point x={bad:g}")
    return vals


class _Panel:
    """One Chebyshev panel of the exponent B along the march direction.

    ``half`` is signed, so t ascending always follows the march; measure
    integrals use |half| while the cumulative exponent uses the sign.
    """

    __slots__ = ("lo", "hi", "half", "x", "brel", "bend", "span")

    def __init__(self, q, lo: float, hi: float):
        self.lo, self.hi = lo, hi
        self.half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        self.x = mid + self.half * _T
        qv = _eval_q(q, self.x)
        g = 2.0 * qv * self.half
        self.brel = _CUM @ g
        self.bend = float(_INT @ g)
        self.span = float(max(np.max(np.abs(self.brel)), abs(self.bend)))

    def measures(self):
        """Log increments of scale and speed mass plus the two cross terms.

        Returns (dlogS, dlogM, log_cross_attain, log_cross_enter) where the
        log increments omit the panel-start exponent (added by the caller)
        and the cross terms are the within-panel iterated integrals.  All
        exponentials are shifted by the panel extremes, so nothing overflows
        even when float spacing forces an oversized exponent span; accuracy
        then degrades only in panels whose contributions are negligible.
        """
        bmax = float(np.max(self.brel))
        bmin = float(np.min(self.brel))
        e_p = np.exp(self.brel - bmax)          # scale density / e^bmax
        e_m = np.exp(bmin - self.brel)          # (speed density / 2) * e^bmin
        a = abs(self.half)
        int_p = max(float(_INT @ e_p), 0.0)
        int_m = max(float(_INT @ e_m), 0.0)
        cum_p = np.maximum(_CUM @ e_p, 0.0)
        cum_m = np.maximum(_CUM @ e_m, 0.0)
        cross_a = max(float(_INT @ (cum_m * e_p)), 0.0)
        cross_e = max(float(_INT @ (cum_p * e_m)), 0.0)
        with np.errstate(divide="ignore"):
            dlogS = bmax + float(np.log(a * int_p))
            dlogM = -bmin + float(np.log(2.0 * a * int_m))
            shift = bmax - bmin
            log_cross_a = shift + float(np.log(2.0 * a * a * cross_a))
            log_cross_e = shift + float(np.log(2.0 * a * a * cross_e))
        return dlogS, dlogM, log_cross_a, log_cross_e


def _block_edges(anchor: float, endpoint: float) -> list[float]:
    if np.isinf(endpoint):
        w = max(1.0, 0.25 * abs(anchor))
        sgn = 1.0 if endpoint > 0 else -1.0
        edges = [anchor + sgn * w * (2.0**k - 1.0) for k in range(INFINITE_BLOCKS + 1)]
    else:
        d0 = endpoint - anchor
        edges = [endpoint - d0 * 0.5**k for k in range(FINITE_BLOCKS + 1)]
    # drop degenerate float-identical tail
    out = [edges[0]]
    for e in edges[1:]:
        if e != out[-1]:
            out.append(e)
    return out


# ---------------------------------------------------------------------------
# direct march: both integrals at once, log-space cumulants
# ---------------------------------------------------------------------------

class _Tracker:
    """Partial sum of one integral with its block-by-block history."""

    __slots__ = ("log_total", "log_blocks", "state")

    def __init__(self):
        self.log_total = -np.inf
        self.log_blocks: list[float] = []
        self.state: str | None = None  # None / "finite" / "infinite" / "reorder"

    def add(self, log_contrib: float):
        self.log_total = float(np.logaddexp(self.log_total, log_contrib))
        if self.log_total > LOG_DIV:
            self.state = "infinite"

    def close_block(self, log_block: float):
        self.log_blocks.append(log_block)
        n = len(self.log_blocks)
        if self.state is not None:
            return
        if n >= 8 and log_block <= self.log_total + np.log(CONV_REL):
            self.state = "finite"
            return
        if n >= RATIO_MIN_BLOCKS and log_block > self.log_total + np.log(CONV_REL):
            tail = np.exp(np.diff(self.log_blocks[-(RATIO_WINDOW + 1):]))
            if len(tail) >= RATIO_WINDOW and np.all((tail >= RATIO_LO) & (tail <= RATIO_HI)):
                self.state = "infinite"

    def collapsing(self) -> bool:
        if len(self.log_blocks) < 4:
            return False
        tail = np.exp(np.diff(self.log_blocks[-4:]))
        return bool(np.all(tail < 0.5))


def _direct_march(q, anchor: float, endpoint: float):
    """March both iterated integrals toward the endpoint.

    Returns (attain: _Tracker, enter: _Tracker, blocks_done); trackers whose
    state is "reorder" must be finished by :func:`_reordered_march`.
    """
    edges = _block_edges(anchor, endpoint)
    attain, enter = _Tracker(), _Tracker()
    logS, logM = -np.inf, -np.inf
    B0 = 0.0
    panels_used = 0
    blocks_done = 0

    for lo, hi in zip(edges[:-1], edges[1:]):
        blk_attain, blk_enter = -np.inf, -np.inf
        stack = [(lo, hi, 0)]
        while stack:
            plo, phi, depth = stack.pop()
            panels_used += 1
            if panels_used > PANEL_BUDGET:
                return attain, enter, blocks_done
            panel = _Panel(q, plo, phi)
            if panel.span > PANEL_MAX_SPAN and depth < 48:
                mid = 0.5 * (plo + phi)
                if mid != plo and mid != phi:
                    stack.append((mid, phi, depth + 1))
                    stack.append((plo, mid, depth + 1))
                    continue
            dlogS, dlogM, lcross_a, lcross_e = panel.measures()
            logdS, logdM = B0 + dlogS, -B0 + dlogM
            if attain.state is None:
                la = float(np.logaddexp(logM + logdS, lcross_a))
                attain.add(la)
                blk_attain = float(np.logaddexp(blk_attain, la))
            if enter.state is None:
                le = float(np.logaddexp(logS + logdM, lcross_e))
                enter.add(le)
                blk_enter = float(np.logaddexp(blk_enter, le))
            logS = float(np.logaddexp(logS, logdS))
            logM = float(np.logaddexp(logM, logdM))
            B0 += panel.bend
            # an exploding exponent starves the opposite-weighted integral:
            # hand it to the reordered strategy instead of marching forever
            if B0 > FUBINI_EXP and enter.state is None and not enter.collapsing():
                enter.state = "reorder"
            if B0 < -FUBINI_EXP and attain.state is None and not attain.collapsing():
                attain.state = "reorder"
            if attain.state is not None and enter.state is not None:
                return attain, enter, blocks_done + 1
        if attain.state is None:
            attain.close_block(blk_attain)
        if enter.state is None:
            enter.close_block(blk_enter)
        blocks_done += 1
        if attain.state is not None and enter.state is not None:
            break
    return attain, enter, blocks_done


# ---------------------------------------------------------------------------
# reordered march, for integrals starved by an exploding exponent
# ---------------------------------------------------------------------------

def _inner_edges(q, start: float, endpoint: float) -> list[float] | None:
    """Block edges for a tail march from ``start``; None requests the
    Laplace shortcut (the decay width is below float spacing at ``start``)."""
    if not np.isinf(endpoint):
        d0 = endpoint - start
        edges = [endpoint - d0 * 0.5**k for k in range(FINITE_BLOCKS + 1)]
    else:
        qv = float(_eval_q(q, np.array([start]))[0])
        decay_width = PANEL_MAX_SPAN / (2.0 * abs(qv) + 1e-300)
        floor = 256.0 * np.spacing(max(1.0, abs(start)))
        if decay_width < floor:
            return None
        sgn = 1.0 if endpoint > 0 else -1.0
        w = min(max(1.0, 0.25 * abs(start)), decay_width)
        edges = [start + sgn * w * (2.0**k - 1.0) for k in range(61)]
    out = [edges[0]]
    for e in edges[1:]:
        if e != out[-1]:
            out.append(e)
    return out


def _laplace_tail_log(q, start: float, endpoint: float, sign: float) -> float:
    """First-order tail of ``int exp(sign*(B(x)-B(start)))`` when the decay
    width is unresolvable in floats: the exponent is locally linear with
    slope ``2 q``, so the integral collapses to the inverse rate."""
    qv = float(_eval_q(q, np.array([start]))[0])
    dirn = 1.0 if endpoint > start else -1.0
    rate = -sign * 2.0 * qv * dirn
    if np.isnan(rate) or rate <= 0:
        raise errors.QuadratureInconclusive(
            f"tail at x={start:g} grows on a scale below float resolution"
        )
    if np.isinf(rate):
        return -np.inf
    base = 2.0 if sign < 0 else 1.0
    return float(np.log(base / rate))


def _inner_tail_log(q, start: float, endpoint: float, sign: float) -> float:
    """log of ``int_start^endpoint exp(sign * (B(x) - B(start))) dx`` (times 2
    when sign < 0, the speed-density convention).

    The exponent is accumulated relative to the start point, so the huge
    absolute exponents of the enclosing reordered march never appear here.
    Contributions shrink geometrically once the exponent collapses; diverging
    tails raise the enclosing integral to infinity.
    """
    edges = _inner_edges(q, start, endpoint)
    if edges is None:
        return _laplace_tail_log(q, start, endpoint, sign)
    total = -np.inf
    B0, panels, tiny_run = 0.0, 0, 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        stack = [(lo, hi, 0)]
        blk = -np.inf
        while stack:
            plo, phi, depth = stack.pop()
            panels += 1
            if panels > INNER_PANEL_BUDGET:
                raise errors.QuadratureInconclusive(
                    f"tail integral at x={start:g} did not settle within budget"
                )
            panel = _Panel(q, plo, phi)
            if panel.span > PANEL_MAX_SPAN and depth < 48:
                mid = 0.5 * (plo + phi)
                if mid != plo and mid != phi:
                    stack.append((mid, phi, depth + 1))
                    stack.append((plo, mid, depth + 1))
                    continue
            dlogS, dlogM, _, _ = panel.measures()
            contrib = sign * B0 + (dlogS if sign > 0 else dlogM)
            total = float(np.logaddexp(total, contrib))
            blk = float(np.logaddexp(blk, contrib))
            B0 += panel.bend
            if total > LOG_INNER_DIV:
                return np.inf
            # a collapsing exponent starves the tail panel by panel; two
            # negligible panels in a row settle it without finishing the block
            tiny_run = tiny_run + 1 if contrib <= total + np.log(INNER_STOP_REL) else 0
            if tiny_run >= 2:
                return total
        if blk <= total + np.log(INNER_STOP_REL):
            return total
    return total


def _reordered_march(q, anchor: float, endpoint: float, kind: str) -> _Tracker:
    """Evaluate one iterated integral as ``int cumdens(y) OutTail(y) dy``.

    kind "enter": cumdens = scale density e^{+B}, OutTail = speed mass of
    (y, endpoint).  kind "attain": the mirror pairing.  Used when B runs off
    to +/-inf and the direct march cannot resolve this integral.
    """
    out_sign = -1.0 if kind == "enter" else 1.0   # exponent sign of the tail density
    cum_sign = -out_sign
    # cumdens(y) * OutTail(y) = [2 for a speed cumdens] * int_y^b
    # exp(out_sign * (B(x) - B(y))) dx, so only exponent *differences* from
    # each node ever materialize -- absolute B, which is running off to
    # +/-inf here, would otherwise eat the whole mantissa.
    log_cum = np.log(2.0) if cum_sign < 0 else 0.0
    edges = _block_edges(anchor, endpoint)
    tracker = _Tracker()
    for lo, hi in zip(edges[:-1], edges[1:]):
        panel = _Panel(q, lo, hi)
        logh = np.empty(CHEB_POINTS)
        for j in range(CHEB_POINTS):
            tail = _inner_tail_log(q, float(panel.x[j]), endpoint, out_sign)
            if np.isinf(tail) and tail > 0:
                tracker.state = "infinite"
                tracker.log_total = np.inf
                return tracker
            logh[j] = log_cum + tail
        ref = float(np.max(logh))
        if np.isfinite(ref):
            hhat = np.exp(logh - ref)
            val = float(_INT @ hhat) * abs(panel.half)
            contrib = ref + np.log(val) if val > 0 else -np.inf
        else:
            contrib = -np.inf
        tracker.add(contrib)
        if tracker.state is not None:
            return tracker
        tracker.close_block(contrib)
        if tracker.state is not None:
            return tracker
    return tracker


# ---------------------------------------------------------------------------
# public entry
# ---------------------------------------------------------------------------

def _finish(q, anchor, endpoint, tracker: _Tracker, kind: str, blocks: int) -> IntegralResult:
    method = "direct"
    if tracker.state == "reorder":
        tracker = _reordered_march(q, anchor, endpoint, kind)
        blocks = len(tracker.log_blocks)
        method = "reordered"
    if tracker.state == "finite":
        return IntegralResult(True, float(np.exp(tracker.log_total)), tracker.log_total, blocks, method)
    if tracker.state == "infinite":
        return IntegralResult(False, np.inf, tracker.log_total, blocks, method)
    raise errors.QuadratureInconclusive(
        f"could not certify the {kind} integral toward {endpoint:g}",
        partial_sum=float(np.exp(min(tracker.log_total, 700.0))),
        blocks=blocks,
    )


def boundary_report(q, anchor: float, endpoint: float, side: str) -> BoundaryReport:
    """Classify one endpoint of the diffusion with drift ``q``."""
    attain_t, enter_t, blocks = _direct_march(q, anchor, endpoint)
    attain = _finish(q, anchor, endpoint, attain_t, "attain", blocks)
    enter = _finish(q, anchor, endpoint, enter_t, "enter", blocks)
    cls = _CLASS_TABLE[(attain.finite, enter.finite)]
    return BoundaryReport(
        side=side, endpoint=endpoint, boundary_class=cls,
        attainability=attain, entrance=enter,
    )
