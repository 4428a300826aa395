"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain where a quantity is defined."""


class InfeasibleError(ValueError):
    """A finite-SNR configuration cannot be realized (e.g. BS power ordering)."""


class GridTooLargeError(DomainError):
    """A finite-SNR search grid exceeds the evaluation guard."""
