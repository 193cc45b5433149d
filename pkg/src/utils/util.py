import logging
import math
import pathlib
from typing import Sequence, Union

import numpy as np

SATELLITE = r"""
            .-.
           ( o )         *          .
        ___/`-'\___            .         *
       |___|   |___|   .   ~~  photons  ~~  .
           /___\           *         .
      ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
        /\      free-space QKD       /\
       /__\  Alice ---------> Bob   /__\
"""


def nice_print(msg, last=False):
    print()
    print("\033[0;35m" + msg + "\033[0m")
    if last:
        print()


def ensure_dir(dirname: Union[str, pathlib.Path]):
    """
    Ensure that the given path is a directory and create it if it does not exist.

    :param dirname: The path to the directory.
    """
    dirname = pathlib.Path(dirname)
    if not dirname.is_dir():
        dirname.mkdir(parents=True, exist_ok=False)


def get_logger(name=__name__, level=logging.INFO) -> logging.Logger:
    """Initializes a module-level python logger."""

    logger = logging.getLogger(name)
    logger.setLevel(level)
    return logger


def make_rng(seed: int, *spawn_key: int) -> np.random.Generator:
    """
    Derive an independent, reproducible random stream from a session seed.

    Every consumer of randomness gets its own spawn key (see the ``STREAM_*``
    constants), so the draws of one stage never shift the draws of another and a
    batch of ticks produces the same numbers no matter which worker runs it.

    :param seed: The 64-bit session seed.
    :param spawn_key: Integers identifying the consumer, e.g. ``(STREAM_QUANTUM, batch_idx)``.
    :return: A numpy ``Generator`` backed by PCG64.
    """
    seed_sequence = np.random.SeedSequence(entropy=int(seed) & (2 ** 64 - 1), spawn_key=tuple(int(k) for k in spawn_key))
    return np.random.default_rng(seed_sequence)


def as_bits(bits: Union[Sequence[int], np.ndarray, str]) -> np.ndarray:
    """Coerce a 0/1 sequence (or a string of '0'/'1', whitespace ignored) into a uint8 array."""
    if isinstance(bits, str):
        bits = [int(ch) for ch in bits if ch in "01"]
    array = np.asarray(bits, dtype=np.uint8)
    if array.ndim != 1:
        raise ValueError(f"Expected a one-dimensional bit sequence, got shape {array.shape}")
    if array.size and array.max() > 1:
        raise ValueError("Bit sequences may only contain 0 and 1")
    return array


def bits_to_string(bits: np.ndarray) -> str:
    return "".join(str(int(b)) for b in bits)


def pack_bits_hex(bits: np.ndarray) -> str:
    return np.packbits(as_bits(bits)).tobytes().hex()


def unpack_bits_hex(hex_string: str, length: int) -> np.ndarray:
    packed = np.frombuffer(bytes.fromhex(hex_string), dtype=np.uint8)
    return np.unpackbits(packed)[:length].astype(np.uint8)


def read_bit_file(path: Union[str, pathlib.Path]) -> np.ndarray:
    """
    Read a bit file: text files hold '0'/'1' characters (any whitespace allowed),
    anything else is treated as raw bytes and unpacked MSB first.
    """
    path = pathlib.Path(path)
    raw = path.read_bytes()
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError:
        text = None
    if text is not None and set(text) <= set("01 \t\r\n"):
        return as_bits(text)
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8)).astype(np.uint8)


def monobit_z(bits: np.ndarray) -> float:
    """Standard score of the ones count against a fair coin; |z| <= 3 passes the monobit check."""
    n = len(bits)
    if n == 0:
        return 0.0
    ones = int(np.count_nonzero(bits))
    return (ones - n / 2) / math.sqrt(n / 4)
