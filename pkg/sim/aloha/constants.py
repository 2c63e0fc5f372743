import math

S_MAX_DEFAULT = 8
DIST_SUM_TOL = 1e-9
DOMAIN_DIAMETER = math.sqrt(2.0)
EXACT_FORMULA_MAX_R = 0.25

# and-or tree evolution
EVOLUTION_MAX_ITERS = 10_000
EVOLUTION_FP_TOL = 1e-10
THRESHOLD_GRID_J = 1000
THRESHOLD_BISECT_TOL = 1e-4
THRESHOLD_MARGIN = 1e-12
RHO_ONE_TOL = 1e-9
HSTAR_TOL = 1e-4

# area variables of unions of unit-area disks
UNIT_DISK_RADIUS = 1.0 / math.sqrt(math.pi)
AREA_SAMPLES_DEFAULT = 100_000
AREA_INNER_POINTS = 4096
AREA_CHUNK = 256
AREA_CACHE_SCHEMA_VERSION = 1
KMAX_PER_DELTA = 5

# degree distribution search
OPT_ITERATIONS = 2000
OPT_RESTARTS = 5
OPT_STEP_SCALE = 0.1
OPT_STEP_DECAY = 0.98
OPT_REJECTION_STREAK = 20
OPT_J_SEARCH = 500
OPT_J_FINAL = 2000
FINETUNE_GRID_POINTS = 101

# Monte Carlo protocol
MC_TRIALS_DEFAULT = 30
MC_TRIALS_SPATIOTEMPORAL = 300
G_GRID_STEP = 0.025
TARGET_PLRS = (0.01, 0.02, 0.1)
EPS_COVERAGE_MAX = 0.999

# physical layer
PHY_ALPHA = 2.0
PHY_THETA = 1.0
PHY_NOISE = 0.09
PHY_CALIBRATION_SAMPLES = 200_000
PHY_CALIBRATION_TOL = 1e-4
PHY_MIN_DISTANCE = 1e-9
