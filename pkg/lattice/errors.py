"""Exception types raised by the lattice package."""


class LatticeError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(LatticeError):
    """Invalid configuration text or schema."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        super().__init__(message)
        self.line = line
        self.column = column


class DomainError(LatticeError, ValueError):
    """Arguments outside the domain of an operation."""


class SpectrumViolation(DomainError):
    """A frequency falls inside a band where the requested quantity is undefined."""

    def __init__(self, omega: float, band: str, message: str | None = None):
        super().__init__(message or f"omega={omega!r} lies inside the {band} spectrum")
        self.omega = omega
        self.band = band


class NonConvergence(LatticeError):
    """An iterative scheme stopped before reaching its tolerance."""

    def __init__(self, message: str, achieved: float, points: int | None = None):
        super().__init__(f"{message} (achieved {achieved:.3e})")
        self.achieved = achieved
        self.points = points


class DegenerateRoot(LatticeError):
    """The null space at a root is not one-dimensional."""


class AssemblyError(LatticeError):
    """Assembled operators violate a structural property."""
