class PrecisionOptions(object):
    DEFAULT_BITS = 512
    MIN_BITS = 64
    # every published number must survive a doubling of the mantissa
    STABILITY_DRIFT = 1e-10
    # automatic doublings allowed when a Gram factorization fails
    MAX_DOUBLINGS = 1
    # bits of headroom used for Newton polishing of quadrature nodes
    EXTRA_BITS = 32


class SequenceOptions(object):
    # hard cap on lazily generated terms
    MAX_TERMS = 200000
    # precision used to decide the merge order of irrational terms
    ORDER_BITS = 256
    # log-spaced probes of the counting function
    H6_GRID_POINTS = 256
    # extra bits dropped from the comparison tolerance of the floating class check
    CHECK_GUARD_BITS = 8
    DEFAULT_PREFIX = 200
    # perturbed-square tails are summed directly up to this many terms
    MAX_TAIL_TERMS = 20000


class TruncationOptions(object):
    M_STEP = 5
    M_MAX = 200
    RTOL = 1e-10
    # consecutive steps below rtol needed to declare a plateau
    PLATEAU_STEPS = 2
    # degree of the polynomial extrapolation of log ||s_k^{(M)}|| in the tail sum
    EXTRAPOLATION_DEGREE = 3
    # terms summed directly for sum_{n > M} 1/|Lambda_n|, the rest follows the local power law
    TAIL_SUM_TERMS = 4000
    # the tail of the family is completed in closed form once Re(Lambda_{M+1}) T reaches this
    COMPLETION_EXPONENT = 12
    RESIDUAL_PANELS = 16
    RESIDUAL_NODES = 40


class QuadratureOptions(object):
    DEFAULT_PANELS = 8
    DEFAULT_NODES = 20
    # Fourier synthesis runs at a lower default precision than the Gram path
    SYNTHESIS_BITS = 192
    # oscillation periods of e^{ixt} covered by one panel
    PERIODS_PER_PANEL = 2
    SYNTHESIS_NODES = 20
    WINDOW_TOLERANCE = 1e-12
    WINDOW_MAX = 20000.0
    WINDOW_MIN = 50.0
    WINDOW_SAFETY = 1.15
    ENVELOPE_POINTS = 96
    ENVELOPE_BINS = 24
    T_GRID_POINTS = 81
    # q_k synthesis is limited to small indices, the normalizer underflows beyond
    MAX_SYNTHESIS_INDEX = 8


class MollifierOptions(object):
    THETA0 = 1
    THETA1 = 8
    THETA2 = 2
    MIN_N = 2
    # cosine factors are multiplied explicitly until a_k |z| drops below this
    SERIES_THRESHOLD = 0.25


class CostOptions(object):
    B1 = 1
    B2 = 1
    POWER_MAX_ITER = 5000
    POWER_TOLERANCE_BITS = 96
    EIGH_FALLBACK_ORDER = 40
    T_GRID = (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    MIN_T_AT_DEFAULT_PRECISION = 0.2
    SMALL_T_BITS = 1024
    MINIMAL_TIME_TERMS = 400
    DIVERGENCE_RATIO = 1.5
    CONTROL_SAMPLES = 101


class SweepOptions(object):
    DEFAULT_THREADS = 1
    CACHE_FILE = 'nogap_cache.h5'
    SVG_WIDTH = 640
    SVG_HEIGHT = 400
    SVG_MARGIN = 40
