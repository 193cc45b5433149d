"""
Eavesdropper models. Every attack reads the pulse train leaving Alice, returns the
train it forwards toward Bob, and records what Eve learned on each tick.

Eve's projective measurements act on the leading photon of a pulse; the forwarded
replacement keeps the original photon count unless a resend photon number is set.
"""
from dataclasses import dataclass, field
from typing import Dict, Optional, Union

import numpy as np
from scipy.optimize import brentq

from src.constants import (ANGLE_H, ANGLE_PLUS45, AttackKind, Basis, EveGuess, InterceptStrategy, Party,
                           ProtocolName, ResendModel)
from src.errors import ParameterError
from src.optics.photonics import (PulseEvent, PulseTrain, b92_angles, malus, multi_photon_probability,
                                  normalize_angle)
from src.utils.util import get_logger

log = get_logger(__name__)


@dataclass(frozen=True)
class AttackModel:
    """
    :param kind: Which attack is active; exactly one per run.
    :param fraction: Probability that any given pulse is attacked (intercept-resend only).
    :param tap_ratio: Beamsplitter tap ratio t of the beamsplit attack, in (0, 1).
    :param model: How an intercept-resend Eve re-prepares the pulse in Alice's basis.
    :param resend_photon_number: Photons per forwarded pulse in intercept-resend; ``None``
        keeps the intercepted pulse's photon count.
    :param bob_detection_rate: Bob's per-pulse detection probability from a baseline run,
        compared against the two-photon emission rate in the QND attack.
    """
    kind: AttackKind = AttackKind.NONE
    fraction: float = 1.0
    tap_ratio: float = 0.5
    model: ResendModel = ResendModel.BEST_GUESS
    resend_photon_number: Optional[int] = None
    bob_detection_rate: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        object.__setattr__(self, "model", ResendModel(self.model))
        if not 0.0 <= self.fraction <= 1.0:
            raise ParameterError(f"Attacked fraction must lie in [0, 1], got {self.fraction}")
        if not 0.0 < self.tap_ratio < 1.0:
            raise ParameterError(f"Tap ratio must lie in (0, 1), got {self.tap_ratio}")
        if self.resend_photon_number is not None and self.resend_photon_number < 1:
            raise ParameterError(f"Resend photon number must be >= 1, got {self.resend_photon_number}")
        if self.bob_detection_rate is not None and not 0.0 <= self.bob_detection_rate <= 1.0:
            raise ParameterError(f"Bob's detection rate must be a per-pulse probability, got {self.bob_detection_rate}")

    @property
    def strategy(self) -> Optional[InterceptStrategy]:
        if self.kind is AttackKind.INTERCEPT_RESEND_ALICE_BASIS:
            return InterceptStrategy.ALICE_BASIS
        if self.kind is AttackKind.INTERCEPT_RESEND_BOBS_BASIS:
            return InterceptStrategy.BOBS_BASIS
        return None


@dataclass(frozen=True)
class EveRecord:
    """Eve's knowledge ledger: a guess per tick (-1 for unknown) and whether she acted."""
    tick_index: np.ndarray
    guess: np.ndarray
    acted: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tick_index", np.asarray(self.tick_index, dtype=np.int64))
        object.__setattr__(self, "guess", np.asarray(self.guess, dtype=np.int8))
        object.__setattr__(self, "acted", np.asarray(self.acted, dtype=bool))
        if np.any((self.guess != EveGuess.UNKNOWN) & ~self.acted):
            raise ValueError("Eve can only hold a guess on ticks she interacted with")

    def __len__(self):
        return len(self.tick_index)

    @classmethod
    def passive(cls, tick_index: np.ndarray) -> "EveRecord":
        n = len(tick_index)
        return cls(tick_index, np.full(n, EveGuess.UNKNOWN), np.zeros(n, dtype=bool))

    @classmethod
    def concatenate(cls, records) -> "EveRecord":
        records = list(records)
        if not records:
            return cls.passive(np.zeros(0))
        return cls(
            np.concatenate([r.tick_index for r in records]),
            np.concatenate([r.guess for r in records]),
            np.concatenate([r.acted for r in records]),
        )

    def at(self, ticks: np.ndarray) -> "EveRecord":
        positions = np.searchsorted(self.tick_index, ticks)
        return EveRecord(self.tick_index[positions], self.guess[positions], self.acted[positions])

    def known(self) -> np.ndarray:
        return self.guess != EveGuess.UNKNOWN

    def accuracy(self, alice_bits: np.ndarray) -> float:
        """Fraction of Eve's guesses that equal Alice's bit."""
        known = self.known()
        if not np.any(known):
            return float("nan")
        return float(np.mean(self.guess[known] == np.asarray(alice_bits)[known]))

    def summary(self, key_ticks: np.ndarray, key_bits: np.ndarray) -> Dict[str, float]:
        """Eve's knowledge of a key given the ticks and values of its bits."""
        on_key = self.at(key_ticks)
        known = on_key.known()
        correct = int(np.count_nonzero(on_key.guess[known] == np.asarray(key_bits)[known]))
        n = len(key_ticks)
        return {
            "key_bits": n,
            "eve_acted": int(np.count_nonzero(on_key.acted)),
            "eve_guessed": int(np.count_nonzero(known)),
            "eve_correct": correct,
            "eve_known_fraction": correct / n if n else 0.0,
        }


@dataclass(frozen=True)
class AttackResult:
    forwarded: PulseTrain
    record: EveRecord
    feasible: Optional[bool] = None
    lossless: bool = False
    stats: Dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class InterceptStep:
    """Single-pulse result: ``forwarded`` is ``None`` when Eve suppressed the pulse."""
    forwarded: Optional[PulseEvent]
    guess: EveGuess
    acted: bool


def reveal_bit(angles: np.ndarray, protocol: ProtocolName = ProtocolName.B92) -> np.ndarray:
    """Decode the bit carried by a known preparation angle."""
    angles = normalize_angle(np.asarray(angles, dtype=np.float64))
    if ProtocolName(protocol) is ProtocolName.B92:
        return (angles == ANGLE_PLUS45).astype(np.int8)
    # BB84: H and +45° carry 0, V and -45° carry 1
    return ((angles == 90.0) | (angles == 135.0)).astype(np.int8)


def _resent_counts(train: PulseTrain, resend_photon_number: Optional[int]) -> np.ndarray:
    if resend_photon_number is None:
        return train.photon_count
    return np.where(train.photon_count > 0, resend_photon_number, 0)


def _intercept_alice_basis(train: PulseTrain, rng: np.random.Generator, model: ResendModel,
                           resend_photon_number: Optional[int], protocol: ProtocolName):
    n = len(train)
    eve_basis = rng.integers(0, 2, size=n)
    u_outcome = rng.random(n)
    occupied = train.photon_count > 0

    basis_first = np.where(eve_basis == Basis.RECTILINEAR, ANGLE_H, ANGLE_PLUS45)
    first = u_outcome < malus(train.angle, basis_first)
    eigenstate = np.where(first, basis_first, basis_first + 90.0)

    if ProtocolName(protocol) is ProtocolName.BB84:
        guess = reveal_bit(eigenstate, ProtocolName.BB84)
        forwarded_angle = eigenstate
    else:
        # H or +45° means the state was not V or not -45°: best guess is Alice's '1'
        guess = first.astype(np.int8)
        if ResendModel(model) is ResendModel.EIGENSTATE:
            forwarded_angle = eigenstate
        else:
            forwarded_angle = b92_angles(guess, Party.ALICE)

    angle = np.where(occupied, forwarded_angle, train.angle)
    counts = np.where(occupied, _resent_counts(train, resend_photon_number), 0)
    guess = np.where(occupied, guess, EveGuess.UNKNOWN)
    return train.replace(photon_count=counts, angle=angle), EveRecord(train.tick_index, guess, occupied)


def _intercept_bobs_basis(train: PulseTrain, rng: np.random.Generator, resend_photon_number: Optional[int]):
    n = len(train)
    eve_bit = rng.integers(0, 2, size=n)
    u_pass = rng.random(n)
    occupied = train.photon_count > 0

    analyzer = b92_angles(eve_bit, Party.BOB)
    passed = occupied & (u_pass < malus(train.angle, analyzer))

    counts = np.where(passed, _resent_counts(train, resend_photon_number), 0)
    angle = np.where(passed, b92_angles(eve_bit, Party.ALICE), train.angle)
    guess = np.where(passed, eve_bit, EveGuess.UNKNOWN)
    return train.replace(photon_count=counts, angle=angle), EveRecord(train.tick_index, guess, occupied)


def intercept_resend_train(train: PulseTrain, strategy: Union[InterceptStrategy, str], rng: np.random.Generator,
                           model: ResendModel = ResendModel.BEST_GUESS, resend_photon_number: Optional[int] = None,
                           protocol: ProtocolName = ProtocolName.B92) -> AttackResult:
    """
    Measure every non-empty pulse and forward a replacement.

    In Alice's basis Eve picks the rectilinear or the diagonal basis at random and
    forwards the B92 state of her best guess (or the eigenstate she observed). In Bob's
    basis she picks one of Bob's analyzers; a pass identifies Alice's bit and the exact
    state is forwarded, a fail suppresses the pulse.
    """
    strategy = InterceptStrategy(strategy)
    if strategy is InterceptStrategy.ALICE_BASIS:
        forwarded, record = _intercept_alice_basis(train, rng, model, resend_photon_number, protocol)
    else:
        if ProtocolName(protocol) is not ProtocolName.B92:
            raise ParameterError("The Bob's-basis attack exploits the B92 analyzers and needs protocol b92")
        forwarded, record = _intercept_bobs_basis(train, rng, resend_photon_number)
    return AttackResult(forwarded, record)


def intercept_resend(pulse: PulseEvent, strategy: Union[InterceptStrategy, str], rng: np.random.Generator,
                     model: ResendModel = ResendModel.BEST_GUESS,
                     resend_photon_number: Optional[int] = None) -> InterceptStep:
    """
    Intercept one pulse.

    :param pulse: The pulse leaving Alice; vacuum passes through untouched.
    :param strategy: ``alice_basis`` or ``bobs_basis``.
    :param rng: Eve's random stream.
    :return: The forwarded pulse (``None`` if suppressed) with Eve's guess.
    """
    result = intercept_resend_train(PulseTrain.from_events([pulse]), strategy, rng, model, resend_photon_number)
    forwarded = result.forwarded[0]
    acted = bool(result.record.acted[0])
    if acted and forwarded.photon_count == 0:
        return InterceptStep(None, EveGuess(int(result.record.guess[0])), acted)
    return InterceptStep(forwarded, EveGuess(int(result.record.guess[0])), acted)


def partial_intercept(train: PulseTrain, fraction: float, strategy: Union[InterceptStrategy, str],
                      rng: np.random.Generator, model: ResendModel = ResendModel.BEST_GUESS,
                      resend_photon_number: Optional[int] = None,
                      protocol: ProtocolName = ProtocolName.B92) -> AttackResult:
    """Attack each pulse independently with probability ``fraction``; the rest pass untouched."""
    if not 0.0 <= fraction <= 1.0:
        raise ParameterError(f"Attacked fraction must lie in [0, 1], got {fraction}")
    attacked = rng.random(len(train)) < fraction
    full = intercept_resend_train(train, strategy, rng, model, resend_photon_number, protocol)

    counts = np.where(attacked, full.forwarded.photon_count, train.photon_count)
    angle = np.where(attacked, full.forwarded.angle, train.angle)
    guess = np.where(attacked, full.record.guess, EveGuess.UNKNOWN)
    acted = attacked & full.record.acted
    return AttackResult(train.replace(photon_count=counts, angle=angle), EveRecord(train.tick_index, guess, acted))


def beamsplit_attack_train(train: PulseTrain, tap_ratio: float, rng: np.random.Generator,
                           protocol: ProtocolName = ProtocolName.B92) -> AttackResult:
    if not 0.0 < tap_ratio < 1.0:
        raise ParameterError(f"Tap ratio must lie in (0, 1), got {tap_ratio}")
    kept = rng.binomial(train.photon_count, tap_ratio)
    known = kept > 0
    guess = np.where(known, reveal_bit(train.angle, protocol), EveGuess.UNKNOWN)
    forwarded = train.replace(photon_count=train.photon_count - kept)
    return AttackResult(forwarded, EveRecord(train.tick_index, guess, known),
                        stats={"eve_kept_photons": int(kept.sum())})


def beamsplit_attack(pulse: PulseEvent, tap_ratio: float, rng: np.random.Generator):
    """
    Tap photons off one pulse: Eve keeps Binomial(n, t) photons and forwards the rest
    with the polarization unchanged. A kept photon is assumed to eventually reveal the bit.

    :return: The forwarded pulse and Eve's guess for this tick.
    """
    result = beamsplit_attack_train(PulseTrain.from_events([pulse]), tap_ratio, rng)
    return result.forwarded[0], EveGuess(int(result.record.guess[0]))


def qnd_attack(train: PulseTrain, bob_detection_rate: float, rng: Optional[np.random.Generator] = None,
               protocol: ProtocolName = ProtocolName.B92) -> AttackResult:
    """
    Photon-number-resolving attack over a lossless channel: Eve keeps every pulse
    holding two or more photons, suppresses all others and sends Bob one fresh photon in
    Alice's state for each kept pulse.

    :param train: Pulses leaving Alice.
    :param bob_detection_rate: Bob's per-pulse detection probability without Eve.
    :param rng: Unused; accepted for a uniform attack signature.
    :return: The forwarded train, Eve's record and whether Bob's rate can be kept up.
    """
    if not 0.0 <= bob_detection_rate <= 1.0:
        raise ParameterError(f"Bob's detection rate must be a per-pulse probability, got {bob_detection_rate}")
    multi = train.photon_count >= 2
    two_photon_rate = float(np.mean(multi)) if len(train) else 0.0
    feasible = two_photon_rate >= bob_detection_rate
    guess = np.where(multi, reveal_bit(train.angle, protocol), EveGuess.UNKNOWN)
    forwarded = train.replace(photon_count=multi.astype(np.int64))
    log.debug(f"QND: two-photon rate {two_photon_rate:.5f} vs Bob's detection rate {bob_detection_rate:.5f}")
    return AttackResult(forwarded, EveRecord(train.tick_index, guess, train.photon_count > 0), feasible, lossless=True,
                        stats={"two_photon_rate": two_photon_rate, "multi_photon_pulses": int(np.count_nonzero(multi))})


def qnd_feasible(mu: float, bob_detection_rate: float) -> bool:
    """Analytic form of the QND predicate: P(n >= 2) at μ against Bob's detection rate."""
    return multi_photon_probability(mu) >= bob_detection_rate


def qnd_threshold_mu(bob_detection_rate: float) -> float:
    """
    Source intensity above which the two-photon emission probability exceeds Bob's
    detection probability, so a QND attack would go unnoticed.
    """
    if not 0.0 < bob_detection_rate < 1.0:
        raise ParameterError(f"Detection rate must lie in (0, 1), got {bob_detection_rate}")
    upper = 1.0
    while multi_photon_probability(upper) < bob_detection_rate:
        upper *= 2
    return float(brentq(lambda mu: multi_photon_probability(mu) - bob_detection_rate, 0.0, upper, xtol=1e-12))


def apply_attack(attack: AttackModel, train: PulseTrain, rng: np.random.Generator,
                 protocol: ProtocolName = ProtocolName.B92) -> AttackResult:
    """Dispatch a scenario's attack model onto a pulse train."""
    if attack.kind is AttackKind.NONE:
        return AttackResult(train, EveRecord.passive(train.tick_index))
    if attack.strategy is not None:
        if attack.fraction < 1.0:
            return partial_intercept(train, attack.fraction, attack.strategy, rng, attack.model,
                                     attack.resend_photon_number, protocol)
        return intercept_resend_train(train, attack.strategy, rng, attack.model, attack.resend_photon_number,
                                      protocol)
    if attack.kind is AttackKind.BEAMSPLIT:
        return beamsplit_attack_train(train, attack.tap_ratio, rng, protocol)
    if attack.bob_detection_rate is None:
        raise ParameterError("The QND attack needs bob_detection_rate from a baseline run")
    return qnd_attack(train, attack.bob_detection_rate, rng, protocol)
