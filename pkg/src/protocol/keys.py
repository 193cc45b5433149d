from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from src.constants import KeyStage
from src.errors import ProtocolError
from src.utils.util import as_bits


@dataclass(frozen=True)
class KeyBuffer:
    """
    An indexed bit sequence tagged with the post-processing stage it belongs to.

    ``ticks`` record the clock tick each bit came from while that still means
    something (raw and sifted keys); after privacy amplification they are simply
    output positions. ``leaked_bits`` counts the bits disclosed on the public channel
    about this key so far.
    """
    bits: np.ndarray
    ticks: Optional[np.ndarray] = None
    stage: KeyStage = KeyStage.RAW
    leaked_bits: int = 0

    def __post_init__(self):
        bits = as_bits(self.bits)
        ticks = np.arange(len(bits), dtype=np.int64) if self.ticks is None else np.asarray(self.ticks, dtype=np.int64)
        if len(ticks) != len(bits):
            raise ProtocolError(f"Key has {len(bits)} bits but {len(ticks)} tick indices")
        if len(ticks) > 1 and np.any(np.diff(ticks) <= 0):
            raise ProtocolError("Tick indices of a key must be strictly increasing")
        if self.leaked_bits < 0:
            raise ProtocolError("Leaked bit count cannot be negative")
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "ticks", ticks)
        object.__setattr__(self, "stage", KeyStage(self.stage))

    def __len__(self):
        return len(self.bits)

    def advance(self, stage: KeyStage, bits: Union[np.ndarray, Sequence[int], None] = None,
                ticks: Optional[np.ndarray] = None) -> "KeyBuffer":
        """Move the key to a later stage, optionally replacing its content."""
        stage = KeyStage(stage)
        if stage < self.stage:
            raise ProtocolError(f"Key stage cannot move back from {self.stage.name} to {stage.name}")
        if bits is None:
            bits, ticks = self.bits, self.ticks
        return KeyBuffer(bits, ticks, stage, self.leaked_bits)

    def leak(self, n_bits: int) -> "KeyBuffer":
        if n_bits < 0:
            raise ProtocolError("The leakage ledger only grows")
        return KeyBuffer(self.bits, self.ticks, self.stage, self.leaked_bits + int(n_bits))

    def with_bits(self, bits: np.ndarray) -> "KeyBuffer":
        """Same ticks and stage, new bit values (e.g. after error correction flips)."""
        return KeyBuffer(bits, self.ticks, self.stage, self.leaked_bits)

    def without(self, positions: np.ndarray) -> "KeyBuffer":
        keep = np.ones(len(self), dtype=bool)
        keep[np.asarray(positions, dtype=np.int64)] = False
        return KeyBuffer(self.bits[keep], self.ticks[keep], self.stage, self.leaked_bits)

    def mismatches(self, other: "KeyBuffer") -> int:
        if len(self) != len(other):
            raise ProtocolError(f"Cannot compare keys of lengths {len(self)} and {len(other)}")
        return int(np.count_nonzero(self.bits != other.bits))


@dataclass(frozen=True)
class SiftResult:
    alice_key: KeyBuffer
    bob_key: KeyBuffer
    detected_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    dual_fire_count: int = 0

    def __post_init__(self):
        if len(self.alice_key) != len(self.bob_key) or not np.array_equal(self.alice_key.ticks, self.bob_key.ticks):
            raise ProtocolError("Sifted keys must share the same tick indices")

    def __len__(self):
        return len(self.alice_key)
