"""
Privacy amplification: row/column dropping over parity blocks, Toeplitz subset
parities, and the final-length policy that decides how far to compress.
"""
import math
from typing import Optional, Union

import numpy as np
from scipy.linalg import matmul_toeplitz, toeplitz

from src.constants import INTERCEPT_EVE_ACCURACY, INTERCEPT_QBER, EveBoundPolicy
from src.errors import ParameterError
from src.optics.photonics import multi_photon_fraction
from src.postprocessing.reconciliation import ParityBlock, fold
from src.utils.util import as_bits, get_logger

log = get_logger(__name__)

DENSE_TOEPLITZ_LIMIT = 4_000_000


def privacy_amplify_drop(block: ParityBlock, rng: np.random.Generator) -> np.ndarray:
    """
    Drop one random row and one random column of a reconciled block.

    The chosen indices are public; both parties draw them from the same stream and so
    keep the same bits.

    :return: The (r-1)(c-1) remaining bits in row-major order, padding removed.
    """
    if block.rows < 2 or block.cols < 2:
        raise ParameterError(f"Dropping needs at least a 2×2 block, got {block.rows}×{block.cols}")
    row = int(rng.integers(block.rows))
    col = int(rng.integers(block.cols))
    keep_rows = np.arange(block.rows) != row
    keep_cols = np.arange(block.cols) != col
    bits = block.bits[np.ix_(keep_rows, keep_cols)]
    padding = block.padding[np.ix_(keep_rows, keep_cols)]
    return bits[~padding].astype(np.uint8)


def drop_rows_cols(bits: np.ndarray, rows: int, cols: int, seed: int) -> np.ndarray:
    """Fold a key in natural order and drop one row and one column from every block."""
    rng = np.random.default_rng(seed)
    fragments = [privacy_amplify_drop(block, rng) for block in fold(as_bits(bits), rows, cols)]
    return np.concatenate(fragments) if fragments else np.zeros(0, dtype=np.uint8)


def toeplitz_bits(n_in: int, n_out: int, seed: int) -> np.ndarray:
    """The n_out + n_in - 1 random bits defining the hashing matrix."""
    return np.random.default_rng(seed).integers(0, 2, size=n_out + n_in - 1, dtype=np.uint8)


def parity_compress(key: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Output bit i is the parity of the key bits selected by row i of ``matrix``."""
    matrix = np.asarray(matrix, dtype=np.int64)
    return (matrix @ as_bits(key).astype(np.int64) % 2).astype(np.uint8)


def privacy_amplify_subsets(key: Union[np.ndarray, str], target_length: int, seed: int) -> np.ndarray:
    """
    Compress a key to ``target_length`` bits with random-subset parities.

    Row i of a seeded binary Toeplitz matrix selects the subset whose parity becomes
    output bit i; every key bit belongs to a given subset with probability ½.
    The Toeplitz family cannot express every subset family. All singletons, which
    return a prefix of the key, is one it misses; explicit families go through
    :func:`parity_compress`.

    :param key: The reconciled key.
    :param target_length: Output length m, strictly shorter than the key.
    :param seed: Public seed shared through a PA_SEED message.
    :return: The m-bit amplified key.
    """
    key = as_bits(key)
    n = len(key)
    if target_length >= n:
        raise ParameterError(f"Target length {target_length} must be shorter than the key ({n} bits)")
    if target_length <= 0:
        return np.zeros(0, dtype=np.uint8)

    diagonals = toeplitz_bits(n, target_length, seed).astype(np.float64)
    first_col = diagonals[:target_length]
    first_row = np.concatenate([diagonals[:1], diagonals[target_length:]])
    if target_length * n <= DENSE_TOEPLITZ_LIMIT:
        return parity_compress(key, toeplitz(first_col, first_row))
    sums = matmul_toeplitz((first_col, first_row), key.astype(np.float64))
    return (np.rint(sums).astype(np.int64) % 2).astype(np.uint8)


def eve_bound_bits(n_bits: int, qber: float, mean_photon_number: Optional[float] = None,
                   policy: Union[EveBoundPolicy, str] = EveBoundPolicy.MULTI_PHOTON_PLUS_INTERCEPT) -> int:
    """
    Upper bound on the bits of an n-bit key known to Eve.

    Multi-photon exposure counts every expected multi-photon detection as known; the
    error rate is read as the fraction of a full intercept-resend attack, which reveals
    a quarter-error-rate key with 75 % accuracy.

    :param n_bits: Key length the bound applies to.
    :param qber: Estimated error rate.
    :param mean_photon_number: Source μ; ``None`` or 0 for a single-photon source.
    :param policy: ``multi_photon_plus_intercept`` or ``none``.
    """
    if n_bits < 0 or not 0.0 <= qber <= 1.0:
        raise ParameterError(f"Need n_bits >= 0 and qber in [0, 1], got {n_bits}, {qber}")
    if EveBoundPolicy(policy) is EveBoundPolicy.NONE:
        return 0
    multi = multi_photon_fraction(mean_photon_number) if mean_photon_number else 0.0
    intercept = min(1.0, qber / INTERCEPT_QBER) * INTERCEPT_EVE_ACCURACY
    return min(n_bits, int(math.ceil(multi * n_bits + intercept * n_bits - 1e-9)))


def compute_final_length(n_reconciled: int, leaked_bits: int, eve_bound: int, security_parameter: int) -> int:
    """
    :return: max(0, n_reconciled - leaked_bits - eve_bound - security_parameter)
    """
    if min(n_reconciled, leaked_bits, eve_bound, security_parameter) < 0:
        raise ParameterError("Final-length inputs must all be >= 0")
    return max(0, n_reconciled - leaked_bits - eve_bound - security_parameter)
