"""Unambiguous discrimination of two non-orthogonal pure states.

Given states a, b with priors, an error-free strategy is a three-outcome
POVM whose guess-a effect never fires on b and whose guess-b effect never
fires on a; ambiguity is paid for with an inconclusive outcome. Within
the two-dimensional span of the states the optimal family is one
parameter: the failure weight q_a = <a|E_inc|a>, constrained by
q_a * q_b >= |<a|b>|^2 with q_b on the constraint boundary. Outside the
span every effect acts as the identity's leftover, so the POVM is defined
on the full space.

The two-lab instance sits exactly at the q_a = 1 edge: the optimal
strategy never guesses a, its guess-a effect is the zero operator, and
the inconclusive probability is 2*sqrt(prior_a*prior_b)*overlap = 1/3.
Conditional predictions for that degenerate outcome are defined through
the detector direction (the unit vector orthogonal to the other state),
which stays meaningful as the effect's weight goes to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DiscriminationError
from .hilbert import PureState, RegisterLayout, born
from .protocol import apply_step
from .scenarios import HBAR_LAB, TBAR_LAB, ScenarioBundle, build_fr

PSD_TOL = -1e-10
SUM_TOL = 1e-10


@dataclass(frozen=True)
class DiscriminationInstance:
    """Two hypothesis states on a shared layout, with prior weights."""

    state_a: PureState
    state_b: PureState
    prior_a: float
    prior_b: float

    def __post_init__(self) -> None:
        if self.state_a.layout.registers != self.state_b.layout.registers:
            raise DiscriminationError("hypothesis states live on different layouts")
        for p in (self.prior_a, self.prior_b):
            if not 0.0 <= p <= 1.0:
                raise DiscriminationError(f"prior {p!r} outside [0, 1]")
        if abs(self.prior_a + self.prior_b - 1.0) > 1e-12:
            raise DiscriminationError("priors must sum to 1")

    @property
    def overlap(self) -> float:
        return abs(self.state_a.overlap(self.state_b))


@dataclass(frozen=True)
class Povm:
    """Labelled positive effects summing to the identity."""

    effects: tuple[tuple[str, np.ndarray], ...]

    def __init__(self, effects) -> None:
        outs = []
        dim = None
        for label, eff in effects:
            mat = np.array(eff, dtype=complex)
            dim = mat.shape[0]
            if mat.shape != (dim, dim):
                raise DiscriminationError(f"effect {label!r} is not square")
            if np.max(np.abs(mat - mat.conj().T)) > SUM_TOL:
                raise DiscriminationError(f"effect {label!r} is not Hermitian")
            low = float(np.min(np.linalg.eigvalsh(mat)))
            if low < PSD_TOL:
                raise DiscriminationError(
                    f"effect {label!r} has negative eigenvalue {low!r}"
                )
            mat.flags.writeable = False
            outs.append((str(label), mat))
        total = sum(mat for _, mat in outs)
        if np.max(np.abs(total - np.eye(dim))) > SUM_TOL:
            raise DiscriminationError("effects do not sum to the identity")
        object.__setattr__(self, "effects", tuple(outs))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.effects)

    def effect(self, label: str) -> np.ndarray:
        for lab, mat in self.effects:
            if lab == label:
                return mat
        raise DiscriminationError(f"unknown effect {label!r}; have {self.labels}")

    def probability(self, state_vec: np.ndarray, label: str) -> float:
        v = np.asarray(state_vec, dtype=complex).reshape(-1)
        return float(np.real(np.vdot(v, self.effect(label) @ v)))


@dataclass(frozen=True)
class UsdStrategy:
    """Optimal error-free strategy with its degeneracy-safe directions."""

    povm: Povm
    inconclusive_probability: float
    q_a: float
    q_b: float
    direction_a: np.ndarray  # detector direction of guess-a (orthogonal to b)
    direction_b: np.ndarray  # detector direction of guess-b (orthogonal to a)


GUESS_A = "guess-a"
GUESS_B = "guess-b"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class UsdPrediction:
    observable: str
    value: Optional[str]
    certain: bool
    statement: str


def build_fr_usd_instance() -> DiscriminationInstance:
    """The outer-lab discrimination faced by a fully quantum reasoner in
    the two-lab protocol: after the inner spin measurement, the outer lab
    holds its heads string with weight 1/6 and a tilted superposition of
    heads and tails strings with weight 5/6."""
    layout = RegisterLayout((("R", 2), ("Dbar", 2), ("Fbar", 2)))
    a = PureState(layout, HBAR_LAB)
    b = PureState(layout, math.sqrt(1 / 5) * HBAR_LAB + math.sqrt(4 / 5) * TBAR_LAB)
    return DiscriminationInstance(a, b, 1 / 6, 5 / 6)


def usd_strategy(instance: DiscriminationInstance) -> UsdStrategy:
    """Optimal error-free discrimination strategy for the instance."""
    a = instance.state_a.amplitudes
    b = instance.state_b.amplitudes
    s_c = complex(np.vdot(a, b))
    s = abs(s_c)
    if s >= 1.0 - 1e-12:
        raise DiscriminationError(
            "states are parallel within tolerance; no error-free discrimination exists"
        )
    dim = a.size
    root = math.sqrt(1.0 - s * s)
    a_perp = (b - s_c * a) / root          # orthogonal to a, in the span
    b_perp = (a - np.conj(s_c) * b) / root  # orthogonal to b, in the span

    if instance.prior_a <= 0.0:
        q_a = 1.0
    else:
        q_a = s * math.sqrt(instance.prior_b / instance.prior_a)
        q_a = min(1.0, max(s * s, q_a))
    q_b = (s * s / q_a) if q_a > 0.0 else 0.0

    c_a = (1.0 - q_a) / (1.0 - s * s)
    c_b = (1.0 - q_b) / (1.0 - s * s)
    e_a = c_a * np.outer(b_perp, b_perp.conj())
    e_b = c_b * np.outer(a_perp, a_perp.conj())
    e_inc = np.eye(dim, dtype=complex) - e_a - e_b
    povm = Povm(((GUESS_A, e_a), (GUESS_B, e_b), (INCONCLUSIVE, e_inc)))
    q = instance.prior_a * q_a + instance.prior_b * q_b
    return UsdStrategy(povm, q, q_a, q_b, b_perp, a_perp)


def optimal_usd(instance: DiscriminationInstance) -> tuple[Povm, float]:
    strategy = usd_strategy(instance)
    return strategy.povm, strategy.inconclusive_probability


def inconclusive_of(instance: DiscriminationInstance, q_a: float) -> float:
    """Prior-weighted inconclusive probability of the strategy with
    failure weight q_a on state a (error-free family, boundary q_b)."""
    s = instance.overlap
    if not s * s <= q_a <= 1.0:
        raise DiscriminationError(f"q_a={q_a!r} outside the valid region [{s*s}, 1]")
    q_b = s * s / q_a if q_a > 0 else 0.0
    return instance.prior_a * q_a + instance.prior_b * q_b


def usd_predictions(outcome: str) -> UsdPrediction:
    """What each discrimination outcome licenses about the announced w."""
    if outcome == GUESS_B:
        return UsdPrediction(
            "w", "fail", True,
            "the outer lab is not in its heads string, so the inner lab was"
            " steered into its fail state",
        )
    if outcome == GUESS_A:
        return UsdPrediction(
            "w", "ok", True,
            "the outer lab is not in the tilted superposition, so the"
            " leftover inner-lab component is the ok state",
        )
    if outcome == INCONCLUSIVE:
        return UsdPrediction("w", None, False, "uncertain about the outcome")
    raise DiscriminationError(
        f"unknown outcome {outcome!r}; expected {GUESS_A}, {GUESS_B}, or {INCONCLUSIVE}"
    )


def conditioned_w_distribution(
    bundle: ScenarioBundle, direction: np.ndarray
) -> dict[str, float]:
    """Announced-w distribution when the outer lab is projected onto a
    detector direction right before the two outside measurements, with the
    okbar/failbar step omitted in favor of the discrimination.

    Substituting the discrimination for the projective step and keeping
    only the inner-lab measurement is the operational reading of undoing
    one measurement to perform a more informative one.
    """
    protocol = bundle.protocol
    state = bundle.references["phi"].state
    arr = state.tensor().reshape(8, -1)
    d = np.asarray(direction, dtype=complex).reshape(-1)
    projected = np.outer(d, d.conj()) @ arr
    norm = float(np.linalg.norm(projected))
    if norm < 1e-12:
        raise DiscriminationError("detector direction has no support on the state")
    conditioned = PureState(state.layout, (projected / norm).reshape(-1))
    final = apply_step(conditioned, protocol.steps[protocol.announced_steps()[-1]])
    return born(final, bundle.named_measurements["record_w"])


def fr_usd_report(bundle: Optional[ScenarioBundle] = None) -> dict:
    """Strategy, outcome distribution, and end-to-end prediction checks
    for the two-lab discrimination instance."""
    bundle = bundle or build_fr()
    instance = build_fr_usd_instance()
    strategy = usd_strategy(instance)
    phi = bundle.references["phi"].state
    arr = phi.tensor().reshape(8, -1)
    outcome_probs = {}
    for label, eff in strategy.povm.effects:
        outcome_probs[label] = float(
            np.real(np.einsum("ik,ij,jk->", arr.conj(), eff, arr))
        )
    w_given_b = conditioned_w_distribution(bundle, strategy.direction_b)
    w_given_a = conditioned_w_distribution(bundle, strategy.direction_a)
    return {
        "overlap": instance.overlap,
        "priors": {"a": instance.prior_a, "b": instance.prior_b},
        "q_a": strategy.q_a,
        "q_b": strategy.q_b,
        "inconclusive_probability": strategy.inconclusive_probability,
        "error_probabilities": {
            "guess-b_given_a": strategy.povm.probability(
                instance.state_a.amplitudes, GUESS_B
            ),
            "guess-a_given_b": strategy.povm.probability(
                instance.state_b.amplitudes, GUESS_A
            ),
        },
        "outcome_probabilities": outcome_probs,
        "w_given_guess_b": w_given_b,
        "w_given_guess_a": w_given_a,
        "predictions": {
            label: {
                "observable": usd_predictions(label).observable,
                "value": usd_predictions(label).value,
                "certain": usd_predictions(label).certain,
            }
            for label in (GUESS_A, GUESS_B, INCONCLUSIVE)
        },
    }
