"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain an operation is defined on."""


class NoBlowupError(RuntimeError):
    """An integration reached its horizon without detecting blow-up."""
