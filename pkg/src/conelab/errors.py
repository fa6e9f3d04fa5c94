"""Exception types shared across the laboratory."""


class ConelabError(Exception):
    """Base class for all laboratory errors."""


class InvalidInput(ConelabError):
    """Malformed argument (non-finite number, bad dimension, bad config value)."""


class OutsideExteriorRegion(ConelabError):
    """Point does not satisfy u < 0 < v (up to the tolerance band)."""


class InvalidCutoffs(ConelabError):
    """Region cutoffs do not satisfy 0 < rho < omega and 0 < sigma < tau."""


class GridTooCoarse(ConelabError):
    """Grid has too few nodes for the requested stencil order."""


class InvalidWeightParams(ConelabError):
    """Split-weight triple (a, b, p) violates the admissibility window."""


class DomainError(ConelabError):
    """Weight evaluated outside its domain (f <= 0)."""


class WeightOverflow(ConelabError):
    """exp(+-F) would overflow at a grid extreme."""


class MissingDerivative(ConelabError):
    """Requested derivative data not available on a custom weight or field."""


class RangeMismatch(ConelabError):
    """Split branch used on a grid whose f-range belongs to the other branch."""


class DegenerateWeight(ConelabError):
    """b = 0 makes the split bulk coefficient identically zero."""


class InvalidPotential(ConelabError):
    """Potential fails a structural requirement (sign, finiteness)."""


class NotInwardDirected(ConelabError):
    """F' >= 0 somewhere on the grid: weight gradient is not inward."""


class ModeNotSupported(ConelabError):
    """Nonlinear operation requested with p != 1 on a mode ell > 0."""


class RegionOutOfGrid(ConelabError):
    """Requested region is not covered by the field's grid."""


class RegionMismatch(ConelabError):
    """Paired regions disagree on shared cutoffs."""


class GammaSignIndefinite(ConelabError):
    """+-Gamma_V changes sign on the region: nonlinear check is vacuous."""


class InsufficientSequence(ConelabError):
    """Fewer than four usable points in a limit sequence."""


class MostlyMasked(ConelabError):
    """Induced potential defined on too small a fraction of the region."""


class UnstableStep(ConelabError):
    """Time step violates the CFL bound."""


class DomainTooSmall(ConelabError):
    """Solver domain cannot cover the requested resampling grid causally."""
