from dataclasses import dataclass, field
from typing import Any, Optional


@dataclass
class RunManifestDTO:
    command: str
    parameters: dict[str, Any]
    seed: Optional[int]
    outputs: list[str] = field(default_factory=list)
    wall_time: float = 0.0
    version: Optional[str] = None
    exit_code: int = 0
