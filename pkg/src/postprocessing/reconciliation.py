"""
Two-dimensional block-parity error correction.

Each pass shuffles the key with a fresh public permutation, folds it into r×c blocks
(the final block zero-padded), and has Alice disclose every row and column parity.
A block whose parities disagree in exactly one row and one column has its single
error at the intersection; Bob flips it. Anything else waits for the next shuffle.
"""
import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Tuple

import numpy as np

from src.constants import DEFAULT_BLOCK_COLS, DEFAULT_BLOCK_ROWS, KeyStage
from src.errors import ParameterError, ProtocolError
from src.protocol.keys import KeyBuffer
from src.protocol.messages import Message, parity_disclosure, parity_status
from src.utils.util import as_bits, get_logger

log = get_logger(__name__)

DEFAULT_MAX_PASSES = 200
CLEAN_PASSES_TO_STOP = 2

Deliver = Callable[[Message], Message]


@dataclass(frozen=True)
class ParityBlock:
    """
    One r×c matrix of key bits. ``positions`` maps every cell to its index in the
    unpermuted key, with -1 marking zero padding.
    """
    rows: int
    cols: int
    bits: np.ndarray
    positions: np.ndarray
    permutation: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.bits.shape != (self.rows, self.cols) or self.positions.shape != (self.rows, self.cols):
            raise ParameterError(f"Block arrays must have shape ({self.rows}, {self.cols})")

    @property
    def padding(self) -> np.ndarray:
        return self.positions < 0

    def row_parities(self) -> np.ndarray:
        return np.bitwise_xor.reduce(self.bits, axis=1)

    def col_parities(self) -> np.ndarray:
        return np.bitwise_xor.reduce(self.bits, axis=0)


def _check_dimensions(rows: int, cols: int):
    if rows < 2 or cols < 2:
        raise ParameterError(f"Blocks need at least 2 rows and 2 columns, got {rows}×{cols}")


def fold_arrays(bits: np.ndarray, rows: int, cols: int,
                permutation: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Fold a (permuted) key into a stack of blocks.

    :return: ``(blocks, positions)`` both of shape (n_blocks, rows, cols).
    """
    _check_dimensions(rows, cols)
    n = len(bits)
    order = np.arange(n, dtype=np.int64) if permutation is None else np.asarray(permutation, dtype=np.int64)
    block_size = rows * cols
    n_blocks = max(1, -(-n // block_size))

    positions = np.full(n_blocks * block_size, -1, dtype=np.int64)
    positions[:n] = order
    values = np.zeros(n_blocks * block_size, dtype=np.uint8)
    values[:n] = np.asarray(bits, dtype=np.uint8)[order]
    return values.reshape(n_blocks, rows, cols), positions.reshape(n_blocks, rows, cols)


def fold(bits: np.ndarray, rows: int, cols: int, permutation: Optional[np.ndarray] = None) -> List[ParityBlock]:
    blocks, positions = fold_arrays(as_bits(bits), rows, cols, permutation)
    return [ParityBlock(rows, cols, b, p, permutation) for b, p in zip(blocks, positions)]


def block_parities(blocks: np.ndarray) -> np.ndarray:
    """Row then column parities of every block, flattened block by block."""
    rows = np.bitwise_xor.reduce(blocks, axis=2)
    cols = np.bitwise_xor.reduce(blocks, axis=1)
    return np.concatenate([rows, cols], axis=1).reshape(-1).astype(np.uint8)


def shuffle_permutation(n_bits: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).permutation(n_bits)


@dataclass(frozen=True)
class PassSummary:
    pass_index: int
    failing_blocks: int
    flips: int


@dataclass(frozen=True)
class ReconciliationReport:
    """
    :param corrected_bob_key: Bob's key after the last pass, stage ``RECONCILED``.
    :param alice_key: Alice's key promoted to ``RECONCILED`` with the same leakage.
    :param parity_bits_disclosed: Exact count of parity bits Alice published.
    :param residual_error_estimate: Lower bound on the remaining error fraction implied
        by the parities of the last pass; 0 once two consecutive passes came back clean.
    :param passes: Number of passes run.
    """
    corrected_bob_key: KeyBuffer
    alice_key: KeyBuffer
    parity_bits_disclosed: int
    residual_error_estimate: float
    passes: int
    converged: bool
    flips: int = 0
    messages: List[Message] = field(default_factory=list)
    history: List[PassSummary] = field(default_factory=list)


def _bob_corrects(bob_blocks: np.ndarray, bob_positions: np.ndarray, alice_parities: np.ndarray,
                  rows: int, cols: int):
    n_blocks = len(bob_blocks)
    disclosed = alice_parities.reshape(n_blocks, rows + cols)
    own = block_parities(bob_blocks).reshape(n_blocks, rows + cols)
    bad = disclosed != own
    bad_rows, bad_cols = bad[:, :rows], bad[:, rows:]
    failing = np.flatnonzero(bad.any(axis=1))

    fixable = (bad_rows.sum(axis=1) == 1) & (bad_cols.sum(axis=1) == 1)
    blocks = np.flatnonzero(fixable)
    r = np.argmax(bad_rows[blocks], axis=1)
    c = np.argmax(bad_cols[blocks], axis=1)
    targets = bob_positions[blocks, r, c]
    targets = targets[targets >= 0]

    residual = int(np.maximum(bad_rows.sum(axis=1), bad_cols.sum(axis=1))[~fixable].sum())
    return failing, targets, residual


def block_parity_reconcile(alice_key: KeyBuffer, bob_key: KeyBuffer, rows: int = DEFAULT_BLOCK_ROWS,
                           cols: int = DEFAULT_BLOCK_COLS, max_passes: int = DEFAULT_MAX_PASSES,
                           rng: Optional[np.random.Generator] = None, deliver: Optional[Deliver] = None,
                           message_ids: Optional[Iterator[int]] = None) -> ReconciliationReport:
    """
    Run block-parity passes until two consecutive passes disclose no parity mismatch.

    :param alice_key: Alice's sifted key (the reference).
    :param bob_key: Bob's sifted key, tick-aligned with Alice's.
    :param rows: Block rows r.
    :param cols: Block columns c.
    :param max_passes: Upper bound on passes; hitting it leaves residual errors flagged.
    :param rng: Stream drawing the public per-pass permutation seeds.
    :param deliver: Carries each message across the public channel and returns what the
        receiver got (authentication happens here in a session). Identity by default.
    :param message_ids: Source of message ids.
    :return: The reconciliation report.
    """
    _check_dimensions(rows, cols)
    if max_passes < 1:
        raise ParameterError(f"max_passes must be >= 1, got {max_passes}")
    if len(alice_key) != len(bob_key) or not np.array_equal(alice_key.ticks, bob_key.ticks):
        raise ProtocolError("Keys are not tick-aligned")
    if len(alice_key) == 0:
        raise ProtocolError("Cannot reconcile empty keys")

    rng = np.random.default_rng(0) if rng is None else rng
    deliver = (lambda message: message) if deliver is None else deliver
    message_ids = itertools.count() if message_ids is None else message_ids

    n = len(alice_key)
    alice_bits, bob_bits = alice_key.bits, bob_key.bits.copy()
    leaked = total_flips = residual = clean_streak = passes = 0
    messages, history = [], []

    while passes < max_passes and clean_streak < CLEAN_PASSES_TO_STOP:
        seed = int(rng.integers(0, 2 ** 63 - 1))
        alice_blocks, _ = fold_arrays(alice_bits, rows, cols, shuffle_permutation(n, seed))
        parities = block_parities(alice_blocks)
        sent = deliver(parity_disclosure(next(message_ids), passes, seed, rows, cols, parities))
        messages.append(sent)
        leaked += sent.disclosed_bits

        received_seed = int(sent.payload["permutation_seed"])
        bob_blocks, bob_positions = fold_arrays(bob_bits, rows, cols, shuffle_permutation(n, received_seed))
        failing, targets, residual = _bob_corrects(bob_blocks, bob_positions, sent.bits(), rows, cols)
        bob_bits[targets] ^= 1
        total_flips += len(targets)

        messages.append(deliver(parity_status(next(message_ids), passes, failing)))
        history.append(PassSummary(passes, len(failing), len(targets)))
        log.debug(f"pass {passes}: {len(failing)} failing blocks, {len(targets)} flips")

        clean_streak = clean_streak + 1 if len(failing) == 0 else 0
        passes += 1

    converged = clean_streak >= CLEAN_PASSES_TO_STOP
    if not converged:
        log.warning(f"Reconciliation stopped after {passes} passes with parity failures left")

    bob_out = bob_key.advance(KeyStage.RECONCILED).with_bits(bob_bits).leak(leaked)
    alice_out = alice_key.advance(KeyStage.RECONCILED).leak(leaked)
    return ReconciliationReport(
        corrected_bob_key=bob_out,
        alice_key=alice_out,
        parity_bits_disclosed=leaked,
        residual_error_estimate=0.0 if converged else residual / n,
        passes=passes,
        converged=converged,
        flips=total_flips,
        messages=messages,
        history=history,
    )
