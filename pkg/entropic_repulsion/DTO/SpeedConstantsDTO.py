from dataclasses import dataclass


@dataclass
class SpeedConstantsDTO:
    j0: float
    gamma_star: float
    gamma_bullet: float
    Gamma_bullet: float
    gamma_circ: float
