"""Constants used throughout synthgym."""

from enum import Enum, IntEnum

import torch


class VariableKind(Enum):
    """Data types a schema variable can have."""
    NUMERIC = "numeric"
    BINARY = "binary"
    CATEGORICAL = "categorical"


class TransformMethod(Enum):
    """Per-variable pre-processing transforms."""
    NONE = "none"
    BOXCOX_MINMAX = "boxcox_minmax"
    LOG_MINMAX = "log_minmax"
    MINMAX_ONLY = "minmax_only"
    DECILE_TO_CATEGORICAL = "decile_to_categorical"


class ActivationKind(Enum):
    """Output activation applied to a segment of the encoded width."""
    SIGMOID = "sigmoid"
    SOFTMAX = "softmax"


class GradientPenaltyPoint(Enum):
    """Where the critic input-gradient is evaluated for the penalty."""
    INTERPOLATES = "interp"
    SYNTHETIC = "syn"


class ExitCode(IntEnum):
    """Process exit codes for the command line."""
    SUCCESS = 0
    OPERATIONAL_ERROR = 1
    VALIDATION_FAILED = 2
    RISK_EXCEEDED = 3


# Tensor settings
DTYPE = torch.float64
NP_DTYPE = "float64"

# Network dimensions
DEFAULT_LATENT_DIM = 128
DEFAULT_HIDDEN_DIM = 128
DEFAULT_EMBED_DIM_BINARY = 2
DEFAULT_EMBED_DIM_CATEGORICAL = 4

# Training
DEFAULT_LAMBDA_GP = 10.0
DEFAULT_LAMBDA_CORR = 10.0
DEFAULT_BATCH_SIZE = 32
DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_ADAM_BETA1 = 0.5
DEFAULT_ADAM_BETA2 = 0.9
DEFAULT_CRITIC_STEPS = 5
DEFAULT_EPOCHS = 500
DEFAULT_CHECKPOINT_EVERY = 50
CURRICULUM_FRACTIONS = (0.2, 0.2, 0.6)
DIVERGENCE_LIMIT = 1e6
DIVERGENCE_PATIENCE = 3

# Pre-processing
BOXCOX_LAMBDA_BOUNDS = (-5.0, 5.0)
BOXCOX_LAMBDA_TOL = 1e-4
POSITIVITY_EPS = 1e-6
DECILE_COUNT = 10
DECILE_LABELS = tuple(f"C{k}" for k in range(1, DECILE_COUNT + 1))
MEASUREMENT_SUFFIX = " (M)"

# Stage 2
DEFAULT_ITERATIONS = 100
DEFAULT_SAMPLE_SIZE = 32
DEFAULT_ALPHA = 0.05
DEFAULT_PASS_FRACTION = 0.7
DEFAULT_THREE_SIGMA_COVERAGE = 0.7
DEFAULT_SIGMA_MULTIPLIER = 2.0

# Stage 3
FLAT_SERIES_RTOL = 1e-12

# Stage 1
KDE_GRID_POINTS = 256

# Privacy
DEFAULT_RISK_THRESHOLD = 0.09
DISTANCE_CHUNK_SIZE = 512

# File formats
FORMAT_VERSION = 1
ENCODED_SUFFIX = ".encoded.pkl"
TRANSFORMS_SUFFIX = ".transforms.json"
CHECKPOINT_NAME = "checkpoint.pkl"
TRAIN_LOG_NAME = "train_log.jsonl"
