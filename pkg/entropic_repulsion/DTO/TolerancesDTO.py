from dataclasses import dataclass


@dataclass
class TolerancesDTO:
    version: int
    standard_errors: float
    ks_occupation0: float
    ks_occupation2: float
    tail_exponent: float
    relative_gamma_star: float
    relative_gamma_bullet: float
    relative_gamma_circ: float
