"""
Session transcripts, per-stage reports and offline transcript verification.
"""
import json
import pathlib
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Union

import numpy as np
import pandas as pd

from src.constants import SCHEMA_VERSION, KeyStage, MessageType
from src.errors import ConfigError
from src.postprocessing.auth import AuthKeyPool, verify_tag_at
from src.protocol.messages import SignedMessage
from src.utils.util import ensure_dir, get_logger, unpack_bits_hex

log = get_logger(__name__)

STAGES = [stage.name.lower() for stage in KeyStage]
REPORT_FORMATS = ("text", "csv")


@dataclass
class SessionTranscript:
    """
    Everything the session put on the public channel plus per-stage bookkeeping.

    Apart from the disclosed QBER-sample bits and parities inside ``messages``, the
    only key material held here is the delivered final key, which is never dumped.
    """
    config: Dict[str, Any]
    auth_pool_snapshot: Optional[AuthKeyPool] = None
    messages: List[SignedMessage] = field(default_factory=list)
    stage_lengths: Dict[str, int] = field(default_factory=dict)
    leakage: Dict[str, int] = field(default_factory=lambda: {"qber_sample": 0, "parity": 0})
    qber: Optional[float] = None
    qber_errors: Optional[int] = None
    sifted_qber_true: Optional[float] = None
    dual_fire_count: int = 0
    reconciliation_passes: int = 0
    eve_bound_bits: Optional[int] = None
    eve: Optional[Dict[str, float]] = None
    attack_feasible: Optional[bool] = None
    auth_bits_consumed: int = 0
    replenished: Optional[bool] = None
    monobit_z: Optional[float] = None
    abort_reason: Optional[str] = None
    alice_key: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8), repr=False)
    bob_key: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8), repr=False)

    @property
    def aborted(self) -> bool:
        return self.abort_reason is not None

    @property
    def delivered_bits(self) -> int:
        return 0 if self.aborted else len(self.alice_key)

    @property
    def keys_match(self) -> bool:
        return not self.aborted and np.array_equal(self.alice_key, self.bob_key)

    def abort(self, reason: str):
        self.abort_reason = reason
        self.alice_key = np.zeros(0, dtype=np.uint8)
        self.bob_key = np.zeros(0, dtype=np.uint8)
        self.stage_lengths.setdefault(KeyStage.FINAL.name.lower(), 0)

    def deliver(self, alice_bits: np.ndarray, bob_bits: np.ndarray):
        self.alice_key = np.asarray(alice_bits, dtype=np.uint8)
        self.bob_key = np.asarray(bob_bits, dtype=np.uint8)

    def disclosed_bits(self, message_type: MessageType) -> int:
        return sum(m.message.disclosed_bits for m in self.messages if m.message.type is message_type)

    def metrics(self) -> Dict[str, Any]:
        """One flat row describing the session; the schema of the CSV report."""
        attack = self.config.get("attack", {})
        row = {
            "schema_version": SCHEMA_VERSION,
            "name": self.config.get("name"),
            "seed": self.config.get("seed"),
            "protocol": self.config.get("protocol"),
            "attack": attack.get("kind"),
            "attack_fraction": attack.get("fraction"),
            "status": "aborted" if self.aborted else "completed",
            "abort_reason": self.abort_reason or "",
        }
        for stage in STAGES:
            row[f"{stage}_bits"] = int(self.stage_lengths.get(stage, 0))
        row.update({
            "delivered_bits": self.delivered_bits,
            "qber": self.qber,
            "qber_errors": self.qber_errors,
            "sifted_qber_true": self.sifted_qber_true,
            "dual_fire_count": self.dual_fire_count,
            "leaked_qber_sample_bits": self.leakage.get("qber_sample", 0),
            "leaked_parity_bits": self.leakage.get("parity", 0),
            "reconciliation_passes": self.reconciliation_passes,
            "eve_bound_bits": self.eve_bound_bits,
            "auth_bits_consumed": self.auth_bits_consumed,
            "replenished": self.replenished,
            "keys_match": self.keys_match,
            "monobit_z": self.monobit_z,
            "attack_feasible": self.attack_feasible,
            "messages": len(self.messages),
        })
        for key in ("eve_acted", "eve_guessed", "eve_correct", "eve_known_fraction"):
            row[key] = None if self.eve is None else self.eve[key]
        return row

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": SCHEMA_VERSION,
            "config": self.config,
            "auth_pool_snapshot": None if self.auth_pool_snapshot is None else self.auth_pool_snapshot.to_dict(),
            "messages": [m.to_dict() for m in self.messages],
            "metrics": self.metrics(),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "SessionTranscript":
        """Rebuild the verifiable part of a dumped transcript (messages, pool snapshot, ledger)."""
        if d.get("version") != SCHEMA_VERSION:
            raise ConfigError(f"Unsupported transcript version {d.get('version')!r}")
        snapshot = d.get("auth_pool_snapshot")
        pool = None if snapshot is None else AuthKeyPool(unpack_bits_hex(snapshot["bits"], snapshot["n_bits"]),
                                                         snapshot["consumed"])
        metrics = d.get("metrics", {})
        return cls(
            config=d["config"],
            auth_pool_snapshot=pool,
            messages=[SignedMessage.from_dict(m) for m in d["messages"]],
            stage_lengths={s: metrics.get(f"{s}_bits", 0) for s in STAGES},
            leakage={"qber_sample": metrics.get("leaked_qber_sample_bits", 0),
                     "parity": metrics.get("leaked_parity_bits", 0)},
            abort_reason=metrics.get("abort_reason") or None,
        )


def transcript_diagnostics(transcript: SessionTranscript) -> List[str]:
    """
    Offline re-check of a transcript.

    Every tag is recomputed from the pool snapshot at its recorded offset, the offsets
    must follow each other without gaps, and the leakage ledger must equal the bits
    the messages actually disclosed.

    :return: One line per problem found; empty when the transcript is consistent.
    """
    problems = []
    pool = transcript.auth_pool_snapshot
    if pool is None:
        return ["transcript has no authentication pool snapshot"]

    offset = pool.consumed
    for signed in transcript.messages:
        tag = signed.tag
        if tag.message_id != signed.message.message_id:
            problems.append(f"message {signed.message.message_id}: tag belongs to message {tag.message_id}")
        if tag.key_offset != offset:
            problems.append(f"message {tag.message_id}: key offset {tag.key_offset}, expected {offset}")
        if not verify_tag_at(signed.message.to_bytes(), tag, pool.bits):
            problems.append(f"message {tag.message_id}: tag does not verify")
        offset = tag.key_offset + tag.key_bits_used

    ledger = {"qber_sample": MessageType.QBER_SAMPLE, "parity": MessageType.PARITY}
    for entry, message_type in ledger.items():
        disclosed = transcript.disclosed_bits(message_type)
        recorded = transcript.leakage.get(entry, 0)
        if disclosed != recorded:
            problems.append(f"ledger: {entry} records {recorded} leaked bits, messages disclose {disclosed}")
    return problems


def verify_transcript(transcript: SessionTranscript) -> bool:
    problems = transcript_diagnostics(transcript)
    for problem in problems:
        log.warning(f"verify_transcript: {problem}")
    return not problems


def format_text_report(transcript: SessionTranscript) -> str:
    row = transcript.metrics()
    width = max(len(k) for k in row)
    lines = [f"QKD session report: {row['name']}", ""]
    lines += [f"{k:<{width}}  {'' if v is None else v}" for k, v in row.items()]
    return "\n".join(lines) + "\n"


def report_frame(transcripts: Iterable[SessionTranscript]) -> pd.DataFrame:
    return pd.DataFrame([t.metrics() for t in transcripts])


def emit_report(transcript: SessionTranscript, directory: Union[str, pathlib.Path],
                formats: Iterable[str] = REPORT_FORMATS, dump_transcript: bool = False) -> List[pathlib.Path]:
    """
    Write the per-stage metrics of a session.

    Reports carry no timestamps, so identical configs give byte-identical files.

    :param transcript: A completed or aborted transcript.
    :param directory: Output directory, created if missing.
    :param formats: Any of ``text`` and ``csv``.
    :param dump_transcript: Also write the full message transcript as JSON.
    :return: Paths of the written files.
    """
    formats = list(formats)
    unknown = set(formats) - set(REPORT_FORMATS)
    if unknown:
        raise ConfigError(f"Unknown report formats {sorted(unknown)}, choose from {list(REPORT_FORMATS)}")

    directory = pathlib.Path(directory)
    ensure_dir(directory)
    stem = transcript.config.get("name", "session")
    written = []
    if "text" in formats:
        path = directory / f"{stem}.txt"
        path.write_text(format_text_report(transcript))
        written.append(path)
    if "csv" in formats:
        path = directory / f"{stem}.csv"
        report_frame([transcript]).to_csv(path, index=False)
        written.append(path)
    if dump_transcript:
        path = directory / f"{stem}.transcript.json"
        with open(path, "w") as f:
            json.dump(transcript.to_dict(), f, sort_keys=True, indent=1)
        written.append(path)
    log.info(f"Report written to {', '.join(str(p) for p in written)}")
    return written


def load_transcript(path: Union[str, pathlib.Path]) -> SessionTranscript:
    with open(path) as f:
        return SessionTranscript.from_dict(json.load(f))
