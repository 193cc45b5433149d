from enum import Enum, IntEnum

SCHEMA_VERSION = 1

# Linear polarization angles in degrees, measured from horizontal.
ANGLE_H = 0.0
ANGLE_PLUS45 = 45.0
ANGLE_V = 90.0
ANGLE_MINUS45 = 135.0

# Seed-sequence spawn keys, one per consumer of randomness in a session.
STREAM_ALICE = 0
STREAM_BOB = 1
STREAM_QUANTUM = 2
STREAM_EVE = 3
STREAM_QBER = 4
STREAM_RECONCILIATION = 5
STREAM_PRIVACY = 6
STREAM_AUTH = 7

DEFAULT_QBER_CEILING = 0.12
DEFAULT_AUTH_POOL_BITS = 1024
DEFAULT_BLOCK_ROWS = 16
DEFAULT_BLOCK_COLS = 16

# Intercept-resend in Alice's basis: error rate induced and fraction of bits Eve identifies.
INTERCEPT_QBER = 0.25
INTERCEPT_EVE_ACCURACY = 0.75


class Outcome(IntEnum):
    NONE = 0
    BIT0 = 1
    BIT1 = 2
    DUAL = 3


class Cause(IntEnum):
    NONE = 0
    SIGNAL = 1
    BACKGROUND = 2
    DARK = 3
    MIXED = 4


class KeyStage(IntEnum):
    RAW = 0
    SIFTED = 1
    RECONCILED = 2
    AMPLIFIED = 3
    FINAL = 4


class Party(str, Enum):
    ALICE = "alice"
    BOB = "bob"


class Basis(IntEnum):
    RECTILINEAR = 0
    DIAGONAL = 1


class AttackKind(str, Enum):
    NONE = "none"
    INTERCEPT_RESEND_ALICE_BASIS = "intercept_resend_alice_basis"
    INTERCEPT_RESEND_BOBS_BASIS = "intercept_resend_bobs_basis"
    BEAMSPLIT = "beamsplit"
    QND = "qnd"


class InterceptStrategy(str, Enum):
    ALICE_BASIS = "alice_basis"
    BOBS_BASIS = "bobs_basis"


class ResendModel(str, Enum):
    BEST_GUESS = "best_guess"
    EIGENSTATE = "eigenstate"


class EveGuess(IntEnum):
    UNKNOWN = -1
    BIT0 = 0
    BIT1 = 1


class MessageType(str, Enum):
    INDEX_LIST = "INDEX_LIST"
    QBER_SAMPLE = "QBER_SAMPLE"
    PARITY = "PARITY"
    PA_SEED = "PA_SEED"
    AUTH_TAG = "AUTH_TAG"


class ProtocolName(str, Enum):
    B92 = "b92"
    BB84 = "bb84"


class BobChoice(str, Enum):
    BEAMSPLITTER = "beamsplitter"
    SEQUENCE = "sequence"


class EveBoundPolicy(str, Enum):
    MULTI_PHOTON_PLUS_INTERCEPT = "multi_photon_plus_intercept"
    NONE = "none"


class AmplificationMethod(str, Enum):
    SUBSETS = "subsets"
    DROP_THEN_SUBSETS = "drop+subsets"
