"""Exception types shared across the toolkit."""


class PhotonFabricError(Exception):
    """Base class for all toolkit errors."""


class NoGuidedMode(PhotonFabricError):
    """The requested guided mode does not exist on the given index cut."""


class SolverFailure(PhotonFabricError):
    """Sparse factorization or linear solve failed."""


class Diverged(PhotonFabricError):
    """An iterative procedure produced non-finite values."""


class NoResonance(PhotonFabricError):
    """No resonance peak with sufficient prominence in the scanned band."""


class UnresolvedControl(PhotonFabricError):
    """A switch state references a control id absent from the layout."""


class Unroutable(PhotonFabricError):
    """The routing request cannot be realized on the given fabric."""


class PaletteTooSmall(PhotonFabricError):
    """Fewer colors available than wavelength channels required."""


class UnsupportedSize(PhotonFabricError):
    """The architecture generator does not support the requested port count."""


class SchemaError(PhotonFabricError):
    """A configuration document failed schema validation."""
