"""Exception types shared across the package."""


class DomainError(ValueError):
    """Operands live on incompatible domains or grids."""


class NumericalGuardError(RuntimeError):
    """A numerical safety check tripped (truncation, aliasing, coarse grid...).

    ``guard`` names the check so batch front ends can report it verbatim.
    """

    def __init__(self, guard, detail=""):
        self.guard = guard
        msg = guard if not detail else f"{guard}: {detail}"
        super().__init__(msg)
