from dataclasses import dataclass, field
from typing import Optional


@dataclass
class McResultDTO:
    experiment: str
    seed: int
    workers: int
    n_paths: int
    steps: dict[str, float]
    estimates: dict[str, float] = field(default_factory=dict)
    standard_errors: dict[str, float] = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)
    passed: bool = False
    acceptance_rate: Optional[float] = None
