"""
Classical-channel message schema.

Every message serializes to canonical JSON bytes (sorted keys, no whitespace) so
that authentication tags and transcript dumps are byte-exact across runs.
"""
import json
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Optional, Union

import numpy as np

from src.constants import SCHEMA_VERSION, AmplificationMethod, MessageType, Party
from src.errors import ConfigError
from src.utils.util import pack_bits_hex, unpack_bits_hex


def _canonical(obj: Dict[str, Any]) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


@dataclass(frozen=True)
class Message:
    type: MessageType
    sender: Party
    message_id: int
    payload: Dict[str, Any]
    version: int = SCHEMA_VERSION

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": self.version,
            "type": MessageType(self.type).value,
            "sender": Party(self.sender).value,
            "message_id": self.message_id,
            "payload": self.payload,
        }

    def to_bytes(self) -> bytes:
        return _canonical(self.to_dict())

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "Message":
        if d.get("version") != SCHEMA_VERSION:
            raise ConfigError(f"Unsupported message schema version {d.get('version')!r}")
        return cls(MessageType(d["type"]), Party(d["sender"]), int(d["message_id"]), dict(d["payload"]), d["version"])

    @classmethod
    def from_bytes(cls, data: bytes) -> "Message":
        return cls.from_dict(json.loads(data.decode("utf-8")))

    @property
    def disclosed_bits(self) -> int:
        """Key-derived bits this message reveals: QBER sample values and Alice's parities."""
        if self.type is MessageType.QBER_SAMPLE:
            return int(self.payload["n_bits"])
        if self.type is MessageType.PARITY and self.payload.get("role") == "parities":
            return int(self.payload["n_bits"])
        return 0

    def bits(self, key: str = "bits") -> np.ndarray:
        return unpack_bits_hex(self.payload[key], int(self.payload["n_bits"]))


@dataclass(frozen=True)
class AuthTag:
    """AUTH_TAG envelope attached to every classical message."""
    message_id: int
    key_offset: int
    key_bits_used: int
    tag: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": SCHEMA_VERSION,
            "type": MessageType.AUTH_TAG.value,
            "message_id": self.message_id,
            "key_offset": self.key_offset,
            "key_bits_used": self.key_bits_used,
            "tag": self.tag,
        }

    def to_bytes(self) -> bytes:
        return _canonical(self.to_dict())

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "AuthTag":
        return cls(int(d["message_id"]), int(d["key_offset"]), int(d["key_bits_used"]), str(d["tag"]))


@dataclass(frozen=True)
class SignedMessage:
    message: Message
    tag: AuthTag

    def to_dict(self) -> Dict[str, Any]:
        return {"message": self.message.to_dict(), "auth": self.tag.to_dict()}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "SignedMessage":
        return cls(Message.from_dict(d["message"]), AuthTag.from_dict(d["auth"]))


def index_list(message_id: int, sender: Party, ticks: Iterable[int], bases: Optional[np.ndarray] = None) -> Message:
    payload = {"ticks": [int(t) for t in ticks]}
    if bases is not None:
        payload["bases"] = pack_bits_hex(bases)
        payload["n_bits"] = len(payload["ticks"])
    return Message(MessageType.INDEX_LIST, sender, message_id, payload)


def qber_sample(message_id: int, sender: Party, ticks: Iterable[int], bits: np.ndarray) -> Message:
    payload = {"ticks": [int(t) for t in ticks], "bits": pack_bits_hex(bits), "n_bits": int(len(bits))}
    return Message(MessageType.QBER_SAMPLE, sender, message_id, payload)


def parity_disclosure(message_id: int, pass_index: int, permutation_seed: int, rows: int, cols: int,
                      parity_bits: np.ndarray) -> Message:
    payload = {
        "role": "parities",
        "pass": int(pass_index),
        "permutation_seed": int(permutation_seed),
        "rows": int(rows),
        "cols": int(cols),
        "bits": pack_bits_hex(parity_bits),
        "n_bits": int(len(parity_bits)),
    }
    return Message(MessageType.PARITY, Party.ALICE, message_id, payload)


def parity_status(message_id: int, pass_index: int, failing_blocks: Iterable[int]) -> Message:
    payload = {"role": "status", "pass": int(pass_index), "failing_blocks": [int(b) for b in failing_blocks]}
    return Message(MessageType.PARITY, Party.BOB, message_id, payload)


def pa_seed(message_id: int, method: Union[AmplificationMethod, str], seed: int, target_length: int) -> Message:
    payload = {"method": AmplificationMethod(method).value, "seed": int(seed), "target_length": int(target_length)}
    return Message(MessageType.PA_SEED, Party.ALICE, message_id, payload)
