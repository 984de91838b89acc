"""Exception types shared across the package.

Every error carries a human-readable message; some carry extra payload
(offending point, diagnostics dict) useful to callers that want to recover.
"""


class Filippov3dError(Exception):
    """Base class for all package errors."""


# ---------------------------------------------------------------------------
# pointwise / classification errors
# ---------------------------------------------------------------------------

class OnSwitchingManifold(Filippov3dError):
    """Field evaluation requested at a point of the switching manifold."""


class UnsupportedOrder(Filippov3dError):
    """Lie derivative order outside the supported range {1, 2, 3}."""


class NotAFoldFold(Filippov3dError):
    """Point fails a fold-fold precondition (vanishing second Lie derivative,
    non-transverse tangency lines, or a vanishing field)."""


class NotSliding(Filippov3dError):
    """Sliding vector field requested outside the sliding region."""


class DegenerateDenominator(Filippov3dError):
    """The sliding-field denominator Yf - Xf is numerically zero."""


# ---------------------------------------------------------------------------
# integration errors
# ---------------------------------------------------------------------------

class NoReturn(Filippov3dError):
    """Max flight time exceeded without the requested crossing."""


class LeftBox(Filippov3dError):
    """Trajectory exited the working box before the requested event."""

    def __init__(self, msg, point=None, time=None):
        super().__init__(msg)
        self.point = point
        self.time = time


class GrazingEvent(Filippov3dError):
    """Tangential departure or arrival at the switching manifold."""

    def __init__(self, msg, point=None, lie=None):
        super().__init__(msg)
        self.point = point
        self.lie = lie


class ExitedDomain(Filippov3dError):
    """Return-map evaluation left the handle's declared domain."""

    def __init__(self, msg, point=None):
        super().__init__(msg)
        self.point = point


class ReachedSliding(Filippov3dError):
    """An intermediate switching-manifold arrival landed in a sliding region
    (pseudo-orbit boundary or sliding capture)."""

    def __init__(self, msg, point=None, label=None, step=None):
        super().__init__(msg)
        self.point = point
        self.label = label
        self.step = step


class StencilFailure(Filippov3dError):
    """A finite-difference stencil evaluation failed."""


class NotTransverse(Filippov3dError):
    """An orbit met a section tangentially, or a section misses the cone."""


# ---------------------------------------------------------------------------
# analysis errors
# ---------------------------------------------------------------------------

class NotTSingularity(Filippov3dError):
    """Analysis requested at a point that is not an invisible fold-fold."""


class NonHyperbolic(Filippov3dError):
    """Local return map eigenvalue within the hyperbolicity margin of 1."""


class Ambiguous(Filippov3dError):
    """Chain classification fell between the transverse and coincident cases
    (small angle, intersection on the switching manifold, or odd count)."""

    def __init__(self, msg, data=None):
        super().__init__(msg)
        self.data = data


class DegenerateBoundary(Filippov3dError):
    """Two marked boundary points of the region partition coincide."""


class PatternViolation(Filippov3dError):
    """The homoclinic intersection pattern required for the quadrilateral
    patch does not hold (wrong crossing count in the stable segment)."""


class NoValidPatch(Filippov3dError):
    """Patch shrinking exhausted without satisfying all conditions."""

    def __init__(self, msg, failed_condition=None):
        super().__init__(msg)
        self.failed_condition = failed_condition


class NotCertified(Filippov3dError):
    """No iterate count up to the bound satisfied the covering relations."""

    def __init__(self, msg, n_max=None, diagnostics=None):
        super().__init__(msg)
        self.n_max = n_max
        self.diagnostics = diagnostics or {}


class NewtonDivergence(Filippov3dError):
    """Periodic-point Newton polish failed; carries the best enclosure."""

    def __init__(self, msg, enclosure=None):
        super().__init__(msg)
        self.enclosure = enclosure


# ---------------------------------------------------------------------------
# CLI errors
# ---------------------------------------------------------------------------

class ConfigError(Filippov3dError):
    """Scenario configuration invalid; message carries field diagnostics."""


class UnknownArtifact(Filippov3dError):
    """plotdata was pointed at a file it does not understand."""
