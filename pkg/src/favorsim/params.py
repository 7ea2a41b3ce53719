from __future__ import annotations

from dataclasses import dataclass, field

from .deployment import InvalidParameterError, Layout, PathlossModel
from .radio import RadioParams
from .scheduler import DEFAULT_MAX_ITERS, DEFAULT_TOL


@dataclass(frozen=True)
class SchedulerOptions:
    group: str = "bs"  # "bs": per serving BS, "operator": one group per operator
    tolerance: float = DEFAULT_TOL
    max_iters: int = DEFAULT_MAX_ITERS

    def __post_init__(self):
        if self.group not in ("bs", "operator"):
            raise InvalidParameterError(f"scheduler group must be 'bs' or 'operator', got {self.group!r}")


@dataclass
class SimParams:
    layout: Layout = field(default_factory=Layout)
    pathloss: PathlossModel = field(default_factory=PathlossModel)
    radio: RadioParams = field(default_factory=RadioParams)
    scheduler: SchedulerOptions = field(default_factory=SchedulerOptions)

    @property
    def pool_size(self) -> int:
        return self.radio.pool_size
