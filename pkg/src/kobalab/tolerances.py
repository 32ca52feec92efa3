"""Documented numerical defaults shared across the package."""

from dataclasses import dataclass, asdict, replace


@dataclass(frozen=True)
class Tolerances:
    # "on the boundary", relative to the domain diameter
    tol_bd: float = 1e-9
    # bracket width below which a distance is reported as exact
    tol_exact: float = 1e-6
    # supporting-functional sign checks
    tol_fun: float = 1e-12
    tol_horo: float = 1e-6
    tol_julia: float = 1e-8

    def as_dict(self):
        return asdict(self)

    def updated(self, **overrides):
        unknown = set(overrides) - set(asdict(self))
        if unknown:
            raise KeyError(f"unknown tolerance(s): {sorted(unknown)}")
        return replace(self, **overrides)


DEFAULT = Tolerances()

DEFAULT_BUDGET = 10_000
