"""Constants and variant selectors for the QBERT toolkit."""

import math
from enum import Enum


# Attention score activations
class AttentionActivation(Enum):
    SPLIT_SOFTMAX = "split_softmax"  # softmax on re and im channels separately
    MOD_SOFTMAX = "mod_softmax"
    REAL_SOFTMAX = "real_softmax"
    SQUARED_ZRELU = "squared_zrelu"


class HiddenActivation(Enum):
    SPLIT_RELU = "split_relu"
    SPLIT_GELU = "split_gelu"
    ZRELU = "zrelu"
    ARGRELU = "argrelu"
    MODRELU = "modrelu"
    MODGELU = "modgelu"


class NormKind(Enum):
    SPLIT_LN = "split_ln"
    COMPLEX_LN = "complex_ln"
    MIXED_LN = "mixed_ln"  # unit norm at [CLS], complex LN elsewhere
    UNIT_NORM = "unit_norm"


class RegKind(Enum):
    NONE = "none"
    ATT_ORTHO = "att_ortho"
    DENSE_ORTHO = "dense_ortho"
    BOTH_ORTHO = "both_ortho"


class InitScheme(Enum):
    SPLIT_NORMAL = "split_normal"
    UNITARY = "unitary"
    RAYLEIGH_GLOROT = "rayleigh_glorot"
    RAYLEIGH_HE = "rayleigh_he"


class MLMOutput(Enum):
    MODULUS = "modulus"
    REAL = "real"


class NSPHead(Enum):
    MEASUREMENT = "measurement"
    MODULUS = "modulus"
    REAL = "real"


class OptimizerKind(Enum):
    CADAMW = "cadamw"
    RADAMW = "radamw"


class ScheduleKind(Enum):
    CONSTANT = "constant"
    LINEAR_WARMUP_DECAY = "linear_warmup_decay"


class Architecture(Enum):
    QBERT = "qbert"
    QCLS_TRANSFORMER = "qcls-transformer"
    QCLS_END2END = "qcls-end2end"


class RunMode(Enum):
    PRETRAIN = "pretrain"
    FINETUNE = "finetune"


# Special token ids
PAD_ID = 0
UNK_ID = 1
CLS_ID = 2
SEP_ID = 3
MASK_ID = 4
SPECIAL_TOKENS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]")
NUM_SPECIAL_TOKENS = len(SPECIAL_TOKENS)
CLS_POSITION = 0
IGNORE_INDEX = -100

# Masking procedure
MASK_PROB = 0.15
MASK_REPLACE_PROB = 0.8
MASK_KEEP_PROB = 0.1  # remaining 0.1 becomes a random token
MIN_TOKEN_FREQ = 2

# Numerical tolerances
NORM_EPS = 1e-12
PROB_EPS = 1e-12
HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-8
UNIT_STATE_TOL = 1e-8
RENORMALIZE_TOL = 1e-6
DEGENERATE_EIG_TOL = 1e-8
JACOBI_REL_TOL = 1e-14
JACOBI_MAX_SWEEPS = 100

# Finite differences
GRADCHECK_STEP = 1e-5
GRADCHECK_TOL = 1e-5
GRADCHECK_UNITARY_TOL = 1e-4
GRADCHECK_SEEDS = (0, 1, 2)

# Initialization
SPLIT_NORMAL_STD = 0.1  # variance 0.01 per channel
GELU_TANH_SCALE = math.sqrt(2.0 / math.pi)
GELU_CUBIC = 0.044715

# Training defaults
PRETRAIN_LR = 1e-4
FINETUNE_LR = 1e-3
PRETRAIN_BATCH_SIZE = 32
FINETUNE_BATCH_SIZE = 128
WARMUP_FRACTION = 0.01

# Quantum simulation
DEFAULT_SHOTS = 100_000
SHOT_CHUNK_SIZE = 100_000
EQUIVALENCE_QUBITS = 3
EQUIVALENCE_CLASSES = 2
EQUIVALENCE_STATES = 16
PROJECTION_INIT_STD = 0.001

# Files
CHECKPOINT_MAGIC = b"QBERTCKPT\n"
CHECKPOINT_FORMAT_VERSION = 1
CHECKPOINT_FILENAME = "model.ckpt"
VOCAB_FILENAME = "vocab.txt"
METRICS_FILENAME = "metrics.csv"
MAX_FILES_TO_KEEP = 10
LOG_LEVEL_ENV = "QBERT_LOG_LEVEL"
