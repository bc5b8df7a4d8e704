import math

from dotenv import load_dotenv

load_dotenv()  # Load .env file - safe to call multiple times (idempotent)

# Coarsening
DEFAULT_BETA = {2: 1.5, 3: 1.8}
# With Sp at half the shortest edge, structured 2:1 coarsening is reproduced at beta = BETA_0 + eps.
BETA_0 = {2: math.sqrt(2.0), 3: math.sqrt(3.0)}
DEFAULT_C_K = math.pi / 3.0

# Remeshing
DEFAULT_C_AR_3D = 60.0
# 2D has Delaunay deletion; this cap only guards fallback contractions.
DEFAULT_C_AR_2D = 20.0
# Minimum aspect ratio per dimension (equilateral triangle, regular tetrahedron).
MIN_ASPECT_RATIO = {2: math.sqrt(3.0), 3: 2.0 * math.sqrt(6.0)}

# Hierarchy
DEFAULT_MIN_COARSE = {2: 200, 3: 300}
DEFAULT_MAX_LEVELS = 12
SUFFICIENT_DECREASE_C_M = 2.0

# Solvers
DEFAULT_RTOL = 1e-12
DEFAULT_SMOOTHS = 3
GMRES_RESTART_ILU = 30
GMRES_RESTART_MG = 50
DEFAULT_MAX_ITERS = 20000
MAX_DENSE_COARSE = 2000

# Tolerances
BARYCENTRIC_TOL = 1e-12
PARTITION_TOL = 1e-10
ORIENTATION_EPS = 1e-12

# Mesh file markers
MARKER_CODES = {"interior": 0, "boundary": 1, "ridge": 2, "corner": 3}

