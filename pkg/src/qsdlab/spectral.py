"""Exact spectral analysis of finite-state reversible sub-Markovian generators.

A chain is described by its rate matrix ``Q`` (off-diagonal rates >= 0, row
deficits = killing rates) together with a strictly positive reference mass
vector ``m`` satisfying detailed balance ``m_i Q_ij = m_j Q_ji``.  Detailed
balance makes ``S = M^{1/2} (-Q) M^{-1/2}`` symmetric, so every operation
here reduces to one orthogonal eigendecomposition: semigroups, resolvents,
survival probabilities, the ground-state transform, and the quasi-stationary
distribution are all evaluated in that basis and cached per generator.

Conventions: eigenvalues of ``-Q`` are sorted ascending, the ground state is
entrywise positive with unit m-weighted norm, and tolerances are relative to
``max(1, ||Q||_inf)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.csgraph
import scipy.sparse.linalg

from . import errors

STRUCT_TOL = 1e-12      # row sums, detailed balance
RESIDUAL_TOL = 1e-10    # eigen residuals
DENSE_EIG_LIMIT = 2000  # above this, shift-invert iteration
SMALL_GAP = 1e-8        # near-degenerate spectral gap flag


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReversibleGenerator:
    """Validated sub-Markovian rate matrix with symmetrizing mass vector."""

    n: int
    Q: np.ndarray
    m: np.ndarray
    kill: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def is_conservative(self) -> bool:
        return bool(np.max(self.kill) <= STRUCT_TOL * _scale(self.Q))


@dataclass(frozen=True)
class PrincipalEigenpair:
    """Bottom of the spectrum of ``-Q``: decay rate and positive ground state."""

    lambda0: float
    phi0: np.ndarray


@dataclass(frozen=True)
class QsdVector:
    """Probability vector over states (nonnegative, sums to one)."""

    nu: np.ndarray

    def __post_init__(self):
        nu = np.asarray(self.nu, dtype=np.float64)
        if np.any(nu < 0):
            raise ValueError("probability vector has negative entries")
        if abs(nu.sum() - 1.0) > 1e-12:
            raise ValueError("probability vector does not sum to 1")
        object.__setattr__(self, "nu", nu)


@dataclass(frozen=True)
class DoobGenerator:
    """Conservative generator of the ground-state transformed chain."""

    Qh: np.ndarray
    mh: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def _scale(Q: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(Q))) if Q.size else 1.0)


def validate_generator(Q, m, tol: float = STRUCT_TOL) -> ReversibleGenerator:
    """Check structure and symmetry of a rate matrix; compute killing rates.

    Raises NegativeRate, PositiveRowSum, NonSymmetric, or Reducible; on
    success returns the immutable generator with ``kill`` equal to the row
    deficits (clipped at zero within tolerance).
    """
    Q = np.array(Q, dtype=np.float64)
    m = np.array(m, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise errors.ConfigParse(f"rate matrix must be square, got shape {Q.shape}")
    n = Q.shape[0]
    if m.shape != (n,):
        raise errors.ConfigParse(f"mass vector shape {m.shape} does not match n={n}")
    if not np.all(np.isfinite(Q)) or not np.all(np.isfinite(m)):
        raise errors.ConfigParse("rate matrix and masses must be finite")
    if np.any(m <= 0):
        raise errors.ConfigParse("masses must be strictly positive")

    scale = _scale(Q)
    off = Q.copy()
    np.fill_diagonal(off, 0.0)
    if np.min(off) < -tol * scale:
        i, j = np.unravel_index(np.argmin(off), off.shape)
        raise errors.NegativeRate(f"Q[{i},{j}] = {Q[i, j]:g} < 0")

    rowsum = Q.sum(axis=1)
    if np.max(rowsum) > tol * scale:
        i = int(np.argmax(rowsum))
        raise errors.PositiveRowSum(f"row {i} sums to {rowsum[i]:g} > 0")
    kill = np.where(rowsum < 0.0, -rowsum, 0.0)

    weighted = m[:, None] * Q
    asym = np.abs(weighted - weighted.T)
    bound = tol * np.maximum(np.maximum(np.abs(weighted), np.abs(weighted.T)), scale * np.min(m))
    np.fill_diagonal(asym, 0.0)
    np.fill_diagonal(bound, np.inf)
    if np.any(asym > bound):
        i, j = np.unravel_index(np.argmax(asym / bound), asym.shape)
        raise errors.NonSymmetric(
            f"m[{i}]*Q[{i},{j}] = {weighted[i, j]:g} but m[{j}]*Q[{j},{i}] = {weighted[j, i]:g}"
        )

    graph = scipy.sparse.csr_matrix((off > 0).astype(np.int8))
    ncomp, _ = scipy.sparse.csgraph.connected_components(graph, directed=True, connection="strong")
    if n > 1 and ncomp != 1:
        raise errors.Reducible(f"rate graph has {ncomp} strongly connected components")

    return ReversibleGenerator(n=n, Q=Q, m=m, kill=kill)


def _as_mask(subset, n: int) -> np.ndarray:
    """Normalize a state subset (bool mask or index list) to a bool mask."""
    subset = np.asarray(subset)
    if subset.dtype == bool:
        if subset.shape != (n,):
            raise ValueError(f"mask length {subset.shape} != n={n}")
        return subset
    mask = np.zeros(n, dtype=bool)
    if subset.size:
        mask[subset.astype(np.intp)] = True
    return mask


# ---------------------------------------------------------------------------
# symmetrized eigenstructure (cached per generator)
# ---------------------------------------------------------------------------

def _is_tridiagonal(Q: np.ndarray) -> bool:
    if Q.shape[0] < 3:
        return True
    mask = np.ones_like(Q, dtype=bool)
    idx = np.arange(Q.shape[0])
    mask[idx, idx] = False
    mask[idx[:-1], idx[:-1] + 1] = False
    mask[idx[1:], idx[1:] - 1] = False
    return not np.any(Q[mask])


def _full_decomposition(Q: np.ndarray, m: np.ndarray, cache: dict) -> dict:
    """All eigenpairs of S = M^{1/2}(-Q)M^{-1/2}, cached."""
    dec = cache.get("eig_full")
    if dec is not None:
        return dec
    sqrt_m = np.sqrt(m)
    if _is_tridiagonal(Q):
        d = -np.diag(Q)
        e = -np.diag(Q, 1) * sqrt_m[:-1] / sqrt_m[1:]
        w, U = scipy.linalg.eigh_tridiagonal(d, e)
    else:
        S = (-Q) * (sqrt_m[:, None] / sqrt_m[None, :])
        S = 0.5 * (S + S.T)
        w, U = scipy.linalg.eigh(S)
    dec = {"w": w, "U": U, "sqrt_m": sqrt_m}
    cache["eig_full"] = dec
    return dec


def _partial_bottom(Q: np.ndarray, m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Two smallest eigenpairs via shift-invert, for large non-tridiagonal chains."""
    sqrt_m = np.sqrt(m)
    S = (-Q) * (sqrt_m[:, None] / sqrt_m[None, :])
    S = 0.5 * (S + S.T)
    sigma = -1e-8 * _scale(Q)
    try:
        w, U = scipy.sparse.linalg.eigsh(scipy.sparse.csc_matrix(S), k=2, sigma=sigma, which="LM")
    except Exception as exc:
        raise errors.ConvergenceFailure(f"shift-invert iteration failed: {exc}") from exc
    order = np.argsort(w)
    return w[order], U[:, order], sqrt_m


def _bottom_pair(g: ReversibleGenerator) -> tuple[float, float, np.ndarray, np.ndarray]:
    """(lambda0, lambda1, u0, sqrt_m) with u0 the bottom eigenvector of S."""
    cached = g._cache.get("bottom")
    if cached is not None:
        return cached
    if "eig_full" in g._cache or g.n <= DENSE_EIG_LIMIT:
        dec = _full_decomposition(g.Q, g.m, g._cache)
        w, U, sqrt_m = dec["w"], dec["U"], dec["sqrt_m"]
        lam1 = float(w[1]) if g.n > 1 else np.inf
        out = (float(w[0]), lam1, U[:, 0].copy(), sqrt_m)
    else:
        w, U, sqrt_m = _partial_bottom(g.Q, g.m)
        out = (float(w[0]), float(w[1]), U[:, 0].copy(), sqrt_m)
    g._cache["bottom"] = out
    return out


def principal_eigenpair(g: ReversibleGenerator) -> PrincipalEigenpair:
    """Smallest eigenvalue of ``-Q`` in the m-inner product and its ground state.

    The ground state is returned entrywise positive with unit m-norm.  The
    residual ``||(-Q) phi - lambda phi||`` is verified to RESIDUAL_TOL
    relative to the rate scale; failure raises ConvergenceFailure.
    """
    lam0, _, u0, sqrt_m = _bottom_pair(g)
    phi = u0 / sqrt_m
    if phi.sum() < 0:
        phi = -phi
    norm = np.sqrt(np.sum(phi * phi * g.m))
    phi = phi / norm
    if np.any(phi <= 0):
        raise errors.NonPositiveGroundState(
            "ground state has non-positive entries; generator may be reducible",
            min_entry=float(phi.min()),
        )
    resid = np.max(np.abs((-g.Q) @ phi - lam0 * phi))
    if resid > RESIDUAL_TOL * _scale(g.Q) * np.max(np.abs(phi)):
        raise errors.ConvergenceFailure(f"eigen residual {resid:g} above tolerance")
    return PrincipalEigenpair(lambda0=lam0, phi0=phi)


def spectral_gap(g: ReversibleGenerator) -> float:
    """Difference between the two smallest eigenvalues of ``-Q``."""
    lam0, lam1, _, _ = _bottom_pair(g)
    return lam1 - lam0


# ---------------------------------------------------------------------------
# semigroup and resolvents
# ---------------------------------------------------------------------------

def _apply_exp(dec: dict, t: float, f: np.ndarray, transpose: bool = False) -> np.ndarray:
    w, U, sqrt_m = dec["w"], dec["U"], dec["sqrt_m"]
    if transpose:
        coeff = U.T @ (np.asarray(f, dtype=np.float64) / sqrt_m)
        out = sqrt_m * (U @ (np.exp(-t * w) * coeff))
    else:
        coeff = U.T @ (sqrt_m * np.asarray(f, dtype=np.float64))
        out = (U @ (np.exp(-t * w) * coeff)) / sqrt_m
    return out


def semigroup_apply(g: ReversibleGenerator, t: float, f) -> np.ndarray:
    """Evaluate ``exp(tQ) f`` through the symmetrized eigenbasis."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    f = np.asarray(f, dtype=np.float64)
    dec = _full_decomposition(g.Q, g.m, g._cache)
    out = _apply_exp(dec, t, f)
    if not np.all(np.isfinite(out)):
        raise errors.OverflowAtHorizon(f"semigroup value overflowed at t={t:g}")
    return out


def resolvent(g: ReversibleGenerator, alpha: float, f) -> np.ndarray:
    """Solve ``(alpha I - Q) u = f`` for ``alpha > 0``."""
    if alpha <= 0:
        raise ValueError("resolvent parameter must be positive")
    f = np.asarray(f, dtype=np.float64)
    A = alpha * np.eye(g.n) - g.Q
    try:
        return np.linalg.solve(A, f)
    except np.linalg.LinAlgError as exc:
        raise errors.SingularSystem(f"resolvent system singular at alpha={alpha:g}") from exc


def feynman_kac_resolvent(g: ReversibleGenerator, K, shift: float, beta: float, f) -> np.ndarray:
    """Resolvent of the rate-shifted chain with unit soft killing on ``K``.

    Solves ``((beta - shift) I + diag(1_K) - Q) u = f``.  The matrix must be
    positive definite in the m-inner product, which holds whenever the
    perturbed bottom eigenvalue exceeds ``shift - beta``; otherwise
    NotPositiveDefinite reports the offending smallest eigenvalue.
    """
    mask = _as_mask(K, g.n)
    f = np.asarray(f, dtype=np.float64)
    sqrt_m = np.sqrt(g.m)
    S = (-g.Q) * (sqrt_m[:, None] / sqrt_m[None, :])
    S = 0.5 * (S + S.T)
    A_sym = S + np.diag(mask.astype(np.float64)) + (beta - shift) * np.eye(g.n)
    try:
        c, low = scipy.linalg.cho_factor(A_sym)
    except np.linalg.LinAlgError as exc:
        wmin = float(scipy.linalg.eigh(A_sym, eigvals_only=True, subset_by_index=(0, 0))[0])
        raise errors.NotPositiveDefinite(
            f"shifted operator not positive definite; smallest eigenvalue {wmin:g}",
            smallest_eigenvalue=wmin,
        ) from exc
    return scipy.linalg.cho_solve((c, low), sqrt_m * f) / sqrt_m


def perturbed_principal_eigenvalue(g: ReversibleGenerator, B) -> float:
    """Bottom eigenvalue of ``-Q + diag(1_B)`` in the m-inner product."""
    mask = _as_mask(B, g.n)
    if not mask.any():
        return principal_eigenpair(g).lambda0
    sqrt_m = np.sqrt(g.m)
    S = (-g.Q) * (sqrt_m[:, None] / sqrt_m[None, :])
    S = 0.5 * (S + S.T) + np.diag(mask.astype(np.float64))
    w = scipy.linalg.eigh(S, eigvals_only=True, subset_by_index=(0, 0))
    return float(w[0])


def exp_lifetime_moment(g: ReversibleGenerator, gamma: float, x: int) -> float:
    """Exponential moment of the lifetime started from state ``x``.

    Exact identity: ``E_x e^{gamma zeta} = 1 + gamma ((-Q - gamma I)^{-1} 1)(x)``,
    finite precisely for ``gamma`` below the principal eigenvalue.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    lam0 = principal_eigenpair(g).lambda0
    if gamma >= lam0:
        raise errors.GammaAtOrAboveLambda0(
            f"gamma={gamma:g} >= lambda0={lam0:g}: the moment diverges", lambda0=lam0
        )
    if gamma == 0.0:
        return 1.0
    u = np.linalg.solve(-g.Q - gamma * np.eye(g.n), np.ones(g.n))
    return 1.0 + gamma * float(u[x])


# ---------------------------------------------------------------------------
# quasi-stationary distribution and conditioning
# ---------------------------------------------------------------------------

def qsd(g: ReversibleGenerator) -> QsdVector:
    """Ground-state mass distribution ``nu_i = phi_i m_i / sum_j phi_j m_j``."""
    if g.is_conservative:
        raise errors.ConservativeChain("chain has no killing; no quasi-stationary distribution")
    eig = principal_eigenpair(g)
    weights = eig.phi0 * g.m
    return QsdVector(nu=weights / weights.sum())


def conditional_law(g: ReversibleGenerator, nu, t: float) -> QsdVector:
    """Law of the chain at time ``t`` conditioned on survival, from law ``nu``."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    nu = nu.nu if isinstance(nu, QsdVector) else np.asarray(nu, dtype=np.float64)
    dec = _full_decomposition(g.Q, g.m, g._cache)
    evolved = _apply_exp(dec, t, nu, transpose=True)
    mass = float(evolved.sum())
    if not np.isfinite(mass) or mass < 1e-300:
        raise errors.ExtinctMass(f"surviving mass {mass:g} underflowed at t={t:g}")
    return QsdVector(nu=np.clip(evolved, 0.0, None) / np.clip(evolved, 0.0, None).sum())


def survival_probability(g: ReversibleGenerator, nu, t: float) -> float:
    """Probability that the chain started from ``nu`` is still alive at ``t``."""
    nu = nu.nu if isinstance(nu, QsdVector) else np.asarray(nu, dtype=np.float64)
    return float(np.dot(nu, semigroup_apply(g, t, np.ones(g.n))))


# ---------------------------------------------------------------------------
# ground-state transform
# ---------------------------------------------------------------------------

def doob_transform(g: ReversibleGenerator, eig: PrincipalEigenpair | None = None) -> DoobGenerator:
    """Ground-state transform ``Qh = Phi^{-1} Q Phi + lambda0 I``.

    The transformed chain is conservative by construction (its diagonal is
    set to the negative off-diagonal row sum, which agrees with the algebraic
    formula up to the eigenpair residual) and reversible w.r.t.
    ``mh = phi0^2 m``.
    """
    if eig is None:
        eig = principal_eigenpair(g)
    phi = np.asarray(eig.phi0, dtype=np.float64)
    if phi.shape != (g.n,) or np.any(phi <= 0):
        raise errors.InconsistentEigenpair("ground state must be strictly positive with length n")
    resid = np.max(np.abs((-g.Q) @ phi - eig.lambda0 * phi))
    if resid > 1e-8 * _scale(g.Q) * np.max(np.abs(phi)):
        raise errors.InconsistentEigenpair(
            f"eigenpair residual {resid:g} too large for this generator", residual=float(resid)
        )
    Qh = g.Q * (phi[None, :] / phi[:, None])
    np.fill_diagonal(Qh, 0.0)
    np.fill_diagonal(Qh, -Qh.sum(axis=1))
    return DoobGenerator(Qh=Qh, mh=phi * phi * g.m)


def _doob_decomposition(dg: DoobGenerator) -> dict:
    return _full_decomposition(dg.Qh, dg.mh, dg._cache)


def doob_spectral_gap(dg: DoobGenerator) -> float:
    """Spectral gap of the transformed chain in its own inner product."""
    dec = _doob_decomposition(dg)
    return float(dec["w"][1] - dec["w"][0]) if dg.mh.size > 1 else np.inf


def semigroup_intertwining_check(g: ReversibleGenerator, eig: PrincipalEigenpair, t: float, f) -> float:
    """Sup-norm residual of the semigroup factorization through the transform.

    Compares ``exp(tQ) f`` with ``e^{-lambda0 t} phi0 * exp(t Qh)(f / phi0)``;
    the two sides follow independent eigendecompositions.
    """
    f = np.asarray(f, dtype=np.float64)
    lhs = semigroup_apply(g, t, f)
    dg = doob_transform(g, eig)
    dec = _doob_decomposition(dg)
    rhs = np.exp(-eig.lambda0 * t) * eig.phi0 * _apply_exp(dec, t, f / eig.phi0)
    return float(np.max(np.abs(lhs - rhs)))


def ergodic_limit(dg: DoobGenerator, f, t: float) -> tuple[np.ndarray, float]:
    """Transformed semigroup value at ``t`` and its ergodic mean.

    Returns ``(exp(t Qh) f, sum(f * mh) / sum(mh))``; the sup-norm distance
    between the two decays like the transformed spectral gap.
    """
    rowsum = np.abs(dg.Qh.sum(axis=1))
    if np.max(rowsum) > 1e-10 * _scale(dg.Qh):
        raise errors.NotConservative(f"transformed generator row sums reach {np.max(rowsum):g}")
    f = np.asarray(f, dtype=np.float64)
    dec = _doob_decomposition(dg)
    value = _apply_exp(dec, t, f)
    limit = float(np.dot(f, dg.mh) / dg.mh.sum())
    return value, limit


# ---------------------------------------------------------------------------
# uniqueness of the conditioned fixed point
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UniquenessReport:
    decay_rates: np.ndarray          # eigenvalues of -Q, ascending
    nonnegative_count: int
    qsd_error: float                 # sup distance of the nonneg eigenvector to the QSD
    gap: float
    small_gap: bool                  # gap below SMALL_GAP: convergence rates unobservable


def uniqueness_check(g: ReversibleGenerator, tol: float = 1e-8) -> UniquenessReport:
    """Verify a single nonnegative left eigenvector, equal to the QSD.

    Any conditioning-invariant law must be a nonnegative left eigenvector of
    the rate matrix; this confirms exactly one exists (up to scale) and that
    it matches :func:`qsd`.
    """
    target = qsd(g).nu
    dec = _full_decomposition(g.Q, g.m, g._cache)
    left = dec["sqrt_m"][:, None] * dec["U"]  # columns: left eigenvectors of Q
    sums = left.sum(axis=0)
    left = left * np.where(sums < 0, -1.0, 1.0)[None, :]
    peaks = np.max(np.abs(left), axis=0)
    nonneg = np.min(left, axis=0) >= -tol * peaks
    count = int(nonneg.sum())
    if count != 1:
        raise errors.MultipleNonnegativeEigenvectors(
            f"found {count} nonnegative left eigenvectors", count=count
        )
    vec = left[:, int(np.argmax(nonneg))]
    vec = vec / vec.sum()
    gap = float(dec["w"][1] - dec["w"][0]) if g.n > 1 else np.inf
    return UniquenessReport(
        decay_rates=dec["w"].copy(),
        nonnegative_count=count,
        qsd_error=float(np.max(np.abs(vec - target))),
        gap=gap,
        small_gap=bool(gap < SMALL_GAP),
    )
