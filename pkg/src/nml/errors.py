"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (bracketing, overflow guard, internal
    consistency check).  Contract violations raise ValueError instead."""
