"""
Exact probability trees for the attacks, used to check the Monte Carlo attack models.
"""
import itertools
from typing import Dict

import numpy as np
from scipy.stats import binom, poisson

from src.constants import ANGLE_H, ANGLE_PLUS45, Party, ResendModel
from src.errors import ParameterError
from src.optics.photonics import b92_angles, malus


def _bob_pass(angle: float, bob_bit: int) -> float:
    return float(malus(angle, b92_angles([bob_bit], Party.BOB)[0]))


def intercept_resend_tree(model: ResendModel = ResendModel.BEST_GUESS) -> Dict[str, float]:
    """
    Enumerate Alice bit × Eve basis × Eve outcome × Bob bit for a single photon
    intercepted in Alice's basis.

    :return: ``qber`` (error probability given a sifted bit), ``eve_accuracy`` (over
        intercepted pulses), ``eve_accuracy_sifted`` (over sifted bits) and
        ``sift_probability`` (per pulse).
    """
    model = ResendModel(model)
    sifted = errors = eve_correct = eve_correct_sifted = 0.0
    for alice_bit, eve_basis, first, bob_bit in itertools.product((0, 1), (0, 1), (True, False), (0, 1)):
        alice_angle = b92_angles([alice_bit], Party.ALICE)[0]
        basis_first = ANGLE_H if eve_basis == 0 else ANGLE_PLUS45
        p_first = float(malus(alice_angle, basis_first))
        p_outcome = p_first if first else 1.0 - p_first
        guess = int(first)
        eigenstate = basis_first if first else basis_first + 90.0
        forwarded = eigenstate if model is ResendModel.EIGENSTATE else b92_angles([guess], Party.ALICE)[0]

        branch = 0.5 * 0.5 * p_outcome
        # Bob's bit is independent of Eve's branch; count Eve's accuracy once per branch
        eve_correct += branch * (guess == alice_bit) / 2
        p_sift = branch * 0.5 * _bob_pass(forwarded, bob_bit)
        sifted += p_sift
        if bob_bit != alice_bit:
            errors += p_sift
        if guess == alice_bit:
            eve_correct_sifted += p_sift

    return {
        "qber": errors / sifted,
        "eve_accuracy": eve_correct,
        "eve_accuracy_sifted": eve_correct_sifted / sifted,
        "sift_probability": sifted,
    }


def bobs_basis_tree() -> Dict[str, float]:
    """
    Single-photon Bob's-basis attack: Eve forwards only the pulses her analyzer passed.

    :return: ``qber``, ``rate_ratio`` against the attack-free sift probability and
        ``eve_accuracy_sifted``.
    """
    baseline = attacked = errors = 0.0
    for alice_bit, eve_bit, bob_bit in itertools.product((0, 1), (0, 1), (0, 1)):
        alice_angle = b92_angles([alice_bit], Party.ALICE)[0]
        if eve_bit == 0:
            baseline += 0.25 * _bob_pass(alice_angle, bob_bit)
        p_eve = 0.25 * _bob_pass(alice_angle, eve_bit)
        forwarded = b92_angles([eve_bit], Party.ALICE)[0]
        p_sift = p_eve * 0.5 * _bob_pass(forwarded, bob_bit)
        attacked += p_sift
        if bob_bit != alice_bit:
            errors += p_sift
    return {"qber": errors / attacked, "rate_ratio": attacked / baseline, "eve_accuracy_sifted": 1.0}


def beamsplit_known_fraction(mu: float, tap_ratio: float, photon_detection_probability: float,
                             n_max: int = None) -> float:
    """
    Fraction of Bob-detected ticks on which Eve holds at least one tapped photon.

    Sums the joint Poisson(μ) × Binomial(n, t) distribution of emitted and tapped photons;
    each forwarded photon independently produces a click with
    ``photon_detection_probability``.
    """
    if mu <= 0:
        raise ParameterError(f"Mean photon number must be > 0, got {mu}")
    if not 0.0 < tap_ratio < 1.0:
        raise ParameterError(f"Tap ratio must lie in (0, 1), got {tap_ratio}")
    if not 0.0 < photon_detection_probability <= 1.0:
        raise ParameterError(f"Detection probability must lie in (0, 1], got {photon_detection_probability}")
    if n_max is None:
        n_max = int(poisson.ppf(1 - 1e-16, mu)) + 10

    n = np.arange(n_max + 1)[:, None]
    k = np.arange(n_max + 1)[None, :]
    joint = poisson.pmf(n, mu) * binom.pmf(k, n, tap_ratio)
    forwarded = np.clip(n - k, 0, None)
    p_detect = np.where(k <= n, 1.0 - (1.0 - photon_detection_probability) ** forwarded, 0.0)

    detected = float(np.sum(joint * p_detect))
    known_and_detected = float(np.sum((joint * p_detect)[:, 1:]))
    return known_and_detected / detected
