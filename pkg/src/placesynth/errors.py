"""Exception types raised across the package."""


class PlaceSynthError(Exception):
    """Base class for all package errors."""


class EmptyCloudError(PlaceSynthError, ValueError):
    pass


class AmbiguousRelationError(PlaceSynthError, ValueError):
    """Two objects are too close horizontally to bin into a direction."""


class InfeasiblePlanSetError(PlaceSynthError, ValueError):
    """The regions implied by a set of plans do not intersect."""


class InfeasibleSceneError(PlaceSynthError, ValueError):
    pass


class PreconditionError(PlaceSynthError, ValueError):
    pass


class UnresolvedAnchorError(PlaceSynthError, KeyError):
    pass


class SchemaError(PlaceSynthError, ValueError):
    """A JSON document does not match the expected schema."""
