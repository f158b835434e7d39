"""Constants for ctcb."""

# numerics
INTEGRATION_STEP = 0.01
DERIVATIVE_STEP = 0.01
BROWNIAN_DIM = 3
NEWTON_MAX_ITER = 5000
NEWTON_STALL_ITER = 50
PRICE_TOL = 1e-8
ROOT_TOL = 1e-12
CALIBRATION_RESIDUAL_TOL = 1e-7
UNIT_NORM_TOL = 1e-12
MERTON_TAIL_TOL = 1e-12
LAMBDA_BRACKET = 10.0
NSTAR_BRACKET = (-1.0, 2.0)

# economic assumptions
DEFAULT_DELTA = 0.05
DEFAULT_OMEGA = 5.0
DEFAULT_H_X = 2.5
DEFAULT_H_P = 1.75
DEFAULT_X_BAR = 0.02
DEFAULT_P_BAR = 0.02

# correlation targets: (rate, inflation), (rate, growth), (inflation, growth)
DEFAULT_CORRELATION_TARGETS = (-0.6, -0.6, 0.7)
DEFAULT_MULTI_STARTS = 16
CORRELATION_TOL = 0.05

# monte carlo
DEFAULT_PATHS = 20_000
DEFAULT_BLOCK_SIZE = 4096
MIN_CONDITIONAL_PATHS = 100
DEFAULT_SEED = 20121207

# calibration policy defaults
DEFAULT_B_I_SHARE = 0.01
DEFAULT_B_X_LEVEL = 0.0
DEFAULT_S_X_LEVEL = 0.01
DEFAULT_CORRELATION_HORIZON = 1.0
DEFAULT_CORRELATION_PASSES = 2

BASIS_POINT = 1e-4
