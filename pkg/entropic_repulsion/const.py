import math

DOMAIN = "entropic_repulsion"
MANIFEST_FILE = "manifest.json"

# Grids
DEFAULT_GRID_POINTS = 2001
BOUNDARY_TOLERANCE = 1e-6
SINGULAR_CUTOFF = 1e-6
NORMALIZATION_TOLERANCE = 1e-8

# Shooting
SERIES_START = 1e-4
SERIES_TERM_TOLERANCE = 1e-16
ODE_METHOD = "RK45"
ODE_RTOL = 1e-10
ODE_ATOL = 1e-12
NODE_GRID_POINTS = 201
DE1_BRACKET = (-10.0, -1.0)
ALPHA_BAND = (0.02, 0.9)
MAX_BRACKET_STEPS = 60
# outward and inward shots meet this many decay lengths past the turning point
MATCH_WIDTH = 2.0
# continuation starts where the unconstrained minimizer sits (nu = 0)
COLD_START_ALPHA = 0.22

RETURN_COST = 2.0 * math.pi ** 2

# Monte Carlo
DEFAULT_SEED = 20240611
DEFAULT_WORKERS = 1
BESQ0_STEP_CAP = 10_000_000
DEFAULT_BIN_WIDTH = 0.02
MIN_MC_PATHS = 100
# the eigen-series tail is below 1e-17 once s n_terms^2 exceeds this
SURVIVAL_SERIES_REACH = 2.0

# Exit codes
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_INFEASIBLE = 4
EXIT_CHECK_FAILED = 5

# CSV headers
RATE_TABLE_HEADER = ("alpha", "J", "C")
DENSITY_HEADER = ("x", "density")
HISTOGRAM_HEADER = ("bin_left", "bin_right", "value")
TAIL_HEADER = ("eps", "tail_mass", "C_eps3")
DETOUR_HEADER = ("v", "holds", "worst_lambda", "worst_margin")

MC_EXPERIMENTS = [
    "rayknight1",
    "rayknight2",
    "fdensity",
    "survival",
    "occupation0",
    "occupation2",
]
