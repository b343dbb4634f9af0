"""Exception hierarchy with machine-readable codes.

Every error carries a ``code`` (stable string used in CLI reports) and an
``exit_code``: 1 for malformed input, 2 for a violated mathematical contract
(e.g. requesting a QSD from a non-explosive model).
"""

from __future__ import annotations


class QsdLabError(Exception):
    """Base class for all package errors."""

    code = "QsdLabError"
    exit_code = 1

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details


def _error(name: str, exit_code: int, doc: str) -> type:
    cls = type(name, (QsdLabError,), {"code": name, "exit_code": exit_code, "__doc__": doc})
    cls.__module__ = __name__
    return cls


# --- generator validation ----------------------------------------------------
NonSymmetric = _error("NonSymmetric", 1, "Detailed balance violated beyond tolerance.")
NegativeRate = _error("NegativeRate", 1, "Off-diagonal rate below zero.")
PositiveRowSum = _error("PositiveRowSum", 1, "Row sum above tolerance (mass creation).")
Reducible = _error("Reducible", 1, "Rate graph is not strongly connected.")

# --- spectral operations -----------------------------------------------------
ConvergenceFailure = _error("ConvergenceFailure", 2, "Eigen iteration missed residual tolerance.")
NonPositiveGroundState = _error("NonPositiveGroundState", 2, "Ground state not entrywise positive.")
OverflowAtHorizon = _error("OverflowAtHorizon", 2, "Semigroup evaluation overflowed.")
SingularSystem = _error("SingularSystem", 2, "Resolvent system singular; generator invalid.")
NotPositiveDefinite = _error("NotPositiveDefinite", 2, "Schroedinger-type resolvent matrix not positive definite.")
GammaAtOrAboveLambda0 = _error("GammaAtOrAboveLambda0", 2, "Exponential moment requested at or above the decay rate; diverges.")
ConservativeChain = _error("ConservativeChain", 2, "Chain has no killing; QSD theory does not apply.")
ExtinctMass = _error("ExtinctMass", 2, "Surviving mass underflowed.")
InconsistentEigenpair = _error("InconsistentEigenpair", 1, "Eigenpair residual too large for the supplied generator.")
NotConservative = _error("NotConservative", 1, "Transformed generator expected to be conservative but is not.")
MultipleNonnegativeEigenvectors = _error(
    "MultipleNonnegativeEigenvectors", 2, "More than one nonnegative left eigenvector; reducibility or numerical failure."
)

# --- diffusion specification -------------------------------------------------
QuadratureFailure = _error("QuadratureFailure", 1, "Coefficient integral did not converge near the anchor.")
QuadratureInconclusive = _error("QuadratureInconclusive", 2, "Boundary integral finiteness could not be certified.")
GridTooCoarse = _error("GridTooCoarse", 1, "Fewer than 8 interior cells.")
InvalidBoundaryClosure = _error("InvalidBoundaryClosure", 1, "Absorbing closure requested at an entrance endpoint.")
NotClassT = _error("NotClassT", 2, "A natural boundary is present; tightness fails.")
NotExplosive = _error("NotExplosive", 2, "Model is conservative; no QSD exists.")

# --- Monte Carlo -------------------------------------------------------------
StepTooLarge = _error("StepTooLarge", 1, "Time step unstable for the drift magnitude.")
InitOutsideDomain = _error("InitOutsideDomain", 1, "Initial point outside the open interval.")
TooFewSurvivors = _error("TooFewSurvivors", 2, "Not enough surviving paths for the estimator.")
GammaTooLarge = _error("GammaTooLarge", 2, "Moment exponent too close to the estimated decay rate.")
HeavyCensoring = _error("HeavyCensoring", 2, "Censored fraction too large for a tail-sensitive moment.")
AbsorptionInHProcess = _error("AbsorptionInHProcess", 2, "Ground-state transformed path was absorbed; interpolation failure.")
NonPositivePhi = _error("NonPositivePhi", 1, "Ground-state interpolant not strictly positive on the simulated range.")

# --- expressions and CLI -----------------------------------------------------
InvalidExpression = _error("InvalidExpression", 1, "Coefficient expression failed to parse or evaluate.")
ConfigParse = _error("ConfigParse", 1, "Problem configuration invalid.")
UnknownSubcommand = _error("UnknownSubcommand", 1, "Subcommand not recognized.")
