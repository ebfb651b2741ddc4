"""Pre-built experiment bundles: protocols plus the bookkeeping that the
epistemic and disclosure layers need (agent rosters, named measurements,
reference states, dispute narration).

Scenario roster:

* alice-bob    -- one friend measuring inside a sealed box, one outside
                  observer measuring the whole box; the minimal
                  memory/outcome correlation demonstration.
* fr           -- two-lab protocol with four agents (Fbar, F, Wbar, W):
                  a biased coin measured inside the outer lab steers a
                  spin measured inside the inner lab, then each lab is
                  measured as a whole from outside. Halts on the joint
                  (okbar, ok) announcement.
* fr-alt-prep  -- the same global state reached through a different story:
                  spin measured first, coin prepared from the spin record
                  and handed over.
* casino       -- the fr protocol wrapped in a wager between the gambler
                  (W) and the house, with a narration of the resulting
                  dispute and who has the sound case.

All registers are two-level; basis index 0 doubles as the blank state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ProtocolError
from .hilbert import (
    Isometry,
    ProjectiveMeasurement,
    PureState,
    RegisterLayout,
    complete_unitary,
    computational_measurement,
    measurement_from_vectors,
)
from .protocol import (
    ApplyIsometry,
    MeasureRecord,
    Prepare,
    Protocol,
    RoundTrace,
    Send,
)

SQ = math.sqrt

E0 = np.array([1.0, 0.0], dtype=complex)
E1 = np.array([0.0, 1.0], dtype=complex)
PLUS = np.array([SQ(0.5), SQ(0.5)], dtype=complex)
MINUS = np.array([SQ(0.5), -SQ(0.5)], dtype=complex)


def _kron(*vecs: np.ndarray) -> np.ndarray:
    out = np.ones(1, dtype=complex)
    for v in vecs:
        out = np.kron(out, v)
    return out


def _basis8(i: int, j: int, k: int) -> np.ndarray:
    vec = np.zeros(8, dtype=complex)
    vec[i * 4 + j * 2 + k] = 1.0
    return vec


@dataclass(frozen=True)
class AgentSpec:
    """An agent, the observable they record, and where the record lives.

    `observable_values[k]` is the value written when outcome k fires; the
    agent's memory register holds basis index k in that branch.
    """

    name: str
    observable: str
    memory: str
    observable_values: tuple[str, ...]
    memory_labels: tuple[str, ...]


@dataclass(frozen=True)
class ReferenceState:
    """A named checkpoint with the step prefix that produces it."""

    name: str
    prefix: int
    state: PureState


@dataclass(frozen=True)
class CasinoRule:
    """Settlement terms of the wager layered on the halting protocol."""

    gambler: str = "W"
    house_expert: str = "Wbar"
    inside_witness: str = "Fbar"
    stake_observable: str = "r"
    reward_value: str = "heads"
    penalty_value: str = "tails"

    def report(self, trace: RoundTrace) -> dict:
        """Narrate the settlement of a finished round.

        Rounds that do not halt settle quietly; the halting round triggers
        the dispute, because the two sides retrodict opposite coin values
        from the same announced pair.
        """
        outcomes = trace.as_dict()
        halted = outcomes.get("Wbar") == "okbar" and outcomes.get("W") == "ok"
        if not halted:
            return {"dispute": False, "announced": outcomes}
        return {
            "dispute": True,
            "announced": outcomes,
            "claims": {
                self.house_expert: {
                    "party": "house",
                    "statement": (
                        f"the coin record was {self.penalty_value}, so the penalty applies"
                    ),
                    "basis": (
                        "retrodiction from the okbar outcome to a coin value that the"
                        " okbar/failbar measurement itself scrambled"
                    ),
                    "assessment": (
                        "unsound: treats the agent's own pre-measurement conditioning as"
                        " still valid after measuring the lab that held the record"
                    ),
                },
                self.gambler: {
                    "party": "gambler",
                    "statement": (
                        f"the ok outcome proves the spin lab was not in its fail state,"
                        f" so the coin record was {self.reward_value}"
                    ),
                    "basis": "discrimination of the two coin-conditioned lab states",
                    "assessment": (
                        "compatible with the outer lab's own in-round reasoning, which"
                        " survives disclosure of its record"
                    ),
                },
            },
            "testimony": {
                self.inside_witness: {
                    "statement": f"recalls recording {self.penalty_value}",
                    "admissible": False,
                    "ground": (
                        "the witness consented to a later measurement that overwrites"
                        " that very record; agency over it was ceded"
                    ),
                }
            },
            "award": self.gambler,
            "remedy": (
                "legal expenses only; the stipulated stake is unenforceable because"
                " the settlement condition is not operationally sound"
            ),
            "operationally_sound": False,
        }


@dataclass(frozen=True)
class ScenarioBundle:
    name: str
    protocol: Protocol
    agents: tuple[AgentSpec, ...]
    register_labels: dict[str, tuple[str, ...]]
    references: dict[str, ReferenceState]
    named_measurements: dict[str, ProjectiveMeasurement]
    dispute_rule: Optional[CasinoRule] = None

    def agent(self, name: str) -> AgentSpec:
        for a in self.agents:
            if a.name == name:
                return a
        raise ProtocolError(f"unknown agent {name!r}; have {[a.name for a in self.agents]}")

    def agent_for_observable(self, observable: str) -> AgentSpec:
        for a in self.agents:
            if a.observable == observable:
                return a
        raise ProtocolError(f"no agent records observable {observable!r}")


# ---------------------------------------------------------------------------
# two-lab scenario family
#
# Layout order (never permuted): outer lab (coin R, device Dbar, memory
# Fbar), inner lab (spin S, device D, memory F), then the outside devices
# and memories (Ebar, Wbar, E, W).

FR_REGISTERS = (
    ("R", 2), ("Dbar", 2), ("Fbar", 2),
    ("S", 2), ("D", 2), ("F", 2),
    ("Ebar", 2), ("Wbar", 2), ("E", 2), ("W", 2),
)

FR_REGISTER_LABELS = {
    "R": ("heads", "tails"),
    "Dbar": ("hbar", "tbar"),
    "Fbar": ("hbar", "tbar"),
    "S": ("up", "down"),
    "D": ("-1/2", "+1/2"),
    "F": ("-1/2", "+1/2"),
    "Ebar": ("okbar", "failbar"),
    "Wbar": ("okbar", "failbar"),
    "E": ("ok", "fail"),
    "W": ("ok", "fail"),
}

LBAR = ("R", "Dbar", "Fbar")
LLAB = ("S", "D", "F")

COIN_AMPS = (complex(SQ(1 / 3)), complex(SQ(2 / 3)))

# classical record strings of each three-register lab
HBAR_LAB = _basis8(0, 0, 0)   # coin heads, recorded twice
TBAR_LAB = _basis8(1, 1, 1)   # coin tails, recorded twice
DOWN_LAB = _basis8(1, 0, 0)   # spin down: spin index 1, records at index 0 (z=-1/2)
UP_LAB = _basis8(0, 1, 1)     # spin up: records at index 1 (z=+1/2)

OKBAR_LAB = (HBAR_LAB - TBAR_LAB) / SQ(2)
FAILBAR_LAB = (HBAR_LAB + TBAR_LAB) / SQ(2)
OK_LAB = (DOWN_LAB - UP_LAB) / SQ(2)
FAIL_LAB = (DOWN_LAB + UP_LAB) / SQ(2)

FR_AGENTS = (
    AgentSpec("Fbar", "r", "Fbar", ("heads", "tails"), ("hbar", "tbar")),
    AgentSpec("F", "z", "F", ("-1/2", "+1/2"), ("-1/2", "+1/2")),
    AgentSpec("Wbar", "wbar", "Wbar", ("okbar", "failbar"), ("okbar", "failbar")),
    AgentSpec("W", "w", "W", ("ok", "fail"), ("ok", "fail")),
)

FR_AGENTS_HT = (
    AgentSpec("Fbar", "r", "Fbar", ("heads", "tails"), ("hbar", "tbar")),
    AgentSpec("F", "z", "F", ("-1/2", "+1/2"), ("-1/2", "+1/2")),
    AgentSpec("Wbar", "wbar", "Wbar", ("hbar", "tbar"), ("hbar", "tbar")),
    AgentSpec("W", "w", "W", ("ok", "fail"), ("ok", "fail")),
)


def _controlled_prep(control_dim: int, target_dim: int, table: dict[int, np.ndarray]) -> np.ndarray:
    """Unitary on control (x) target loading table[c] into a blank target
    when the control holds c. Unassigned columns completed deterministically."""
    dim = control_dim * target_dim
    assigned = {}
    for c, vec in table.items():
        col = np.zeros(dim, dtype=complex)
        col[c * target_dim : (c + 1) * target_dim] = vec
        assigned[c * target_dim + 0] = col
    return complete_unitary(dim, assigned)


def _coin_measurement() -> ProjectiveMeasurement:
    return computational_measurement(
        RegisterLayout((("R", 2),)), ("R",), {"R": ("hbar", "tbar")}
    )


def _spin_measurement() -> ProjectiveMeasurement:
    # outcome index 0 records z=-1/2 (spin basis index 1, "down"), matching
    # the ("-1/2", "+1/2") labelling of the D and F registers
    down = np.array([[0, 0], [0, 1]], dtype=complex)
    up = np.array([[1, 0], [0, 0]], dtype=complex)
    return ProjectiveMeasurement(("S",), (("-1/2", down), ("+1/2", up)))


def _spin_prep_isometry() -> Isometry:
    """Conditional spin preparation keyed on the coin memory: recorded heads
    loads spin-down, recorded tails loads the diagonal state."""
    right = PLUS  # (up + down)/sqrt(2)
    mat = _controlled_prep(2, 2, {0: E1, 1: right})
    sub = RegisterLayout((("Fbar", 2), ("S", 2)))
    return Isometry(sub, sub, mat)


def _wbar_measurement(basis: str) -> ProjectiveMeasurement:
    if basis == "okfail":
        return measurement_from_vectors(
            LBAR, (("okbar", OKBAR_LAB),), complement_label="failbar"
        )
    if basis == "ht":
        return measurement_from_vectors(
            LBAR, (("hbar", HBAR_LAB),), complement_label="tbar"
        )
    raise ProtocolError(f"unknown outer-lab basis {basis!r}; choose okfail or ht")


def _w_measurement() -> ProjectiveMeasurement:
    return measurement_from_vectors(LLAB, (("ok", OK_LAB),), complement_label="fail")


def _halting_ok(outcomes: dict[str, str]) -> bool:
    return outcomes.get("Wbar") == "okbar" and outcomes.get("W") == "ok"


def _expand(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """Interleave an outer-side vector on (R,Dbar,Fbar,Ebar,Wbar) with an
    inner-side vector on (S,D,F,E,W) into global layout order."""
    o = outer.reshape(8, 4)
    i = inner.reshape(8, 4)
    return np.einsum("ab,cd->acbd", o, i).reshape(-1)


def _fr_reference_amplitudes() -> dict[str, tuple[int, np.ndarray]]:
    """Checkpoint amplitude tables written as explicit tensor products."""
    heads, tails = E0, E1
    hb, tb = E0, E1
    up, down = E0, E1
    blank2 = E0
    right = (up + down) / SQ(2)

    init = _kron(SQ(1 / 3) * heads + SQ(2 / 3) * tails, *(blank2,) * 9)
    psi = (
        SQ(1 / 3) * _kron(heads, hb, hb, down, *(blank2,) * 6)
        + SQ(2 / 3) * _kron(tails, tb, tb, right, *(blank2,) * 6)
    )
    phi = SQ(1 / 3) * (
        _kron(HBAR_LAB, DOWN_LAB, *(blank2,) * 4)
        + _kron(TBAR_LAB, DOWN_LAB, *(blank2,) * 4)
        + _kron(TBAR_LAB, UP_LAB, *(blank2,) * 4)
    )

    # bold composites: the lab state together with the announcement records
    okbar_out = _kron(OKBAR_LAB, E0, E0)       # Ebar = Wbar = index 0
    failbar_out = _kron(FAILBAR_LAB, E1, E1)   # Ebar = Wbar = index 1
    down_in = _kron(DOWN_LAB, E0, E0)          # E, W still blank
    up_in = _kron(UP_LAB, E0, E0)
    ok_in = _kron(OK_LAB, E0, E0)
    fail_in = _kron(FAIL_LAB, E1, E1)

    xi = SQ(2 / 3) * (
        _expand(failbar_out, down_in)
        + 0.5 * _expand(failbar_out, up_in)
        - 0.5 * _expand(okbar_out, up_in)
    )
    zeta = SQ(1 / 12) * (
        _expand(okbar_out, ok_in)
        - _expand(okbar_out, fail_in)
        + _expand(failbar_out, ok_in)
        + 3.0 * _expand(failbar_out, fail_in)
    )
    return {
        "init": (1, init),
        "psi": (3, psi),
        "phi": (5, phi),
        "xi": (6, xi),
        "zeta": (7, zeta),
    }


def _fr_named_measurements(
    layout: RegisterLayout, wbar_basis: str
) -> dict[str, ProjectiveMeasurement]:
    wbar_labels = ("okbar", "failbar") if wbar_basis == "okfail" else ("hbar", "tbar")
    return {
        "wbar_okfail": _wbar_measurement("okfail"),
        "wbar_ht": _wbar_measurement("ht"),
        "w_okfail": _w_measurement(),
        "announced_joint": computational_measurement(
            layout, ("Wbar", "W"), {"Wbar": wbar_labels, "W": ("ok", "fail")}
        ),
        "record_r": computational_measurement(layout, ("Fbar",), {"Fbar": ("heads", "tails")}),
        "record_z": computational_measurement(layout, ("F",), {"F": ("-1/2", "+1/2")}),
        "record_wbar": computational_measurement(layout, ("Wbar",), {"Wbar": wbar_labels}),
        "record_w": computational_measurement(layout, ("W",), {"W": ("ok", "fail")}),
        "L_state": measurement_from_vectors(
            LLAB, (("ok", OK_LAB), ("fail", FAIL_LAB)), complement_label="other"
        ),
    }


def build_fr(wbar_basis: str = "okfail") -> ScenarioBundle:
    """Two-lab protocol: coin measured inside the outer lab, spin prepared
    from the coin record and measured inside the inner lab, then both labs
    measured as wholes from outside.

    `wbar_basis` selects the outer observer's basis: "okfail" (the default
    interference basis, with halting on the joint (okbar, ok)) or "ht"
    (the lab's own record basis, which makes the protocol non-halting).
    """
    layout = RegisterLayout(FR_REGISTERS)
    halting = _halting_ok if wbar_basis == "okfail" else None
    steps = (
        Prepare("R", COIN_AMPS, "n:00"),
        MeasureRecord("Fbar", _coin_measurement(), "Dbar", "Fbar", "coherent", "n:10"),
        ApplyIsometry(_spin_prep_isometry(), ("Fbar", "S"), "n:10"),
        Send("S", "Fbar", "F", "n:15"),
        MeasureRecord("F", _spin_measurement(), "D", "F", "coherent", "n:20"),
        MeasureRecord("Wbar", _wbar_measurement(wbar_basis), "Ebar", "Wbar", "announced", "n:30"),
        MeasureRecord("W", _w_measurement(), "E", "W", "announced", "n:40"),
    )
    protocol = Protocol(layout, steps, halting, name="fr")
    refs_raw = _fr_reference_amplitudes()
    if wbar_basis != "okfail":
        # the interference-basis checkpoints no longer occur
        refs_raw = {k: v for k, v in refs_raw.items() if k in ("init", "psi", "phi")}
    references = {
        name: ReferenceState(name, prefix, PureState(layout, amps))
        for name, (prefix, amps) in refs_raw.items()
    }
    agents = FR_AGENTS if wbar_basis == "okfail" else FR_AGENTS_HT
    labels = dict(FR_REGISTER_LABELS)
    if wbar_basis == "ht":
        labels["Ebar"] = ("hbar", "tbar")
        labels["Wbar"] = ("hbar", "tbar")
    return ScenarioBundle(
        name="fr",
        protocol=protocol,
        agents=agents,
        register_labels=labels,
        references=references,
        named_measurements=_fr_named_measurements(layout, wbar_basis),
    )


def build_fr_alt_prep() -> ScenarioBundle:
    """Same global state as `build_fr`, told the other way round: the spin
    is measured first, then the coin is prepared conditioned on the spin
    record and handed to the outer lab."""
    layout = RegisterLayout(FR_REGISTERS)
    # recorded z=-1/2 loads the balanced coin, recorded z=+1/2 loads tails
    coin_prep = Isometry(
        RegisterLayout((("F", 2), ("R", 2))),
        RegisterLayout((("F", 2), ("R", 2))),
        _controlled_prep(2, 2, {0: PLUS, 1: E1}),
    )
    steps = (
        Prepare("S", (complex(SQ(1 / 3)), complex(SQ(2 / 3))), "m:00"),
        MeasureRecord("F", _spin_measurement(), "D", "F", "coherent", "m:10"),
        ApplyIsometry(coin_prep, ("F", "R"), "m:20"),
        Send("R", "F", "Fbar", "m:25"),
        MeasureRecord("Fbar", _coin_measurement(), "Dbar", "Fbar", "coherent", "m:30"),
        MeasureRecord("Wbar", _wbar_measurement("okfail"), "Ebar", "Wbar", "announced", "n:30"),
        MeasureRecord("W", _w_measurement(), "E", "W", "announced", "n:40"),
    )
    protocol = Protocol(layout, steps, _halting_ok, name="fr-alt-prep")
    refs_raw = _fr_reference_amplitudes()
    references = {
        "junction": ReferenceState("junction", 5, PureState(layout, refs_raw["phi"][1])),
        "zeta": ReferenceState("zeta", 7, PureState(layout, refs_raw["zeta"][1])),
    }
    return ScenarioBundle(
        name="fr-alt-prep",
        protocol=protocol,
        agents=FR_AGENTS,
        register_labels=dict(FR_REGISTER_LABELS),
        references=references,
        named_measurements=_fr_named_measurements(layout, "okfail"),
    )


def build_casino() -> ScenarioBundle:
    """The halting two-lab protocol with the wager narration attached."""
    base = build_fr()
    return ScenarioBundle(
        name="casino",
        protocol=base.protocol,
        agents=base.agents,
        register_labels=base.register_labels,
        references=base.references,
        named_measurements=base.named_measurements,
        dispute_rule=CasinoRule(),
    )


# ---------------------------------------------------------------------------
# alice-bob

AB_REGISTER_LABELS = {
    "S": ("0", "1"),
    "M": ("0", "1"),
    "A": ("zero", "one"),
}


def matched_bob_basis() -> tuple[tuple[str, np.ndarray], ...]:
    """Outcomes that check system, device, and memory for agreement."""
    return (
        ("match0", _kron(E0, E0, E0)),
        ("match1", _kron(E1, E1, E1)),
    )


def bell_bob_basis() -> tuple[tuple[str, np.ndarray], ...]:
    """Interference outcomes pairing system-device parity with the memory
    diagonal; each fires with probability 1/2 on the post-measurement state."""
    bell_plus = (_kron(E0, E0) + _kron(E1, E1)) / SQ(2)
    bell_minus = (_kron(E0, E0) - _kron(E1, E1)) / SQ(2)
    return (
        ("parity_plus", np.kron(bell_plus, PLUS)),
        ("parity_minus", np.kron(bell_minus, MINUS)),
    )


def build_alice_bob(
    bob_basis: tuple[tuple[str, np.ndarray], ...] | None = None,
) -> ScenarioBundle:
    """Friend (Alice) measures a balanced qubit inside a sealed box; the
    outside observer (Bob) then measures system, device, and memory jointly.

    `bob_basis` lists (label, unit vector on S (x) M (x) A) outcomes; the
    remainder of the space is absorbed into an extra `other` outcome. The
    default agreement basis succeeds with probability exactly 1.
    """
    if bob_basis is None:
        bob_basis = matched_bob_basis()
    n_out = len(bob_basis) + 1
    bdim = max(2, n_out)
    layout = RegisterLayout(
        (("S", 2), ("M", 2), ("A", 2), ("EB", bdim), ("B", bdim))
    )
    alice_meas = computational_measurement(
        RegisterLayout((("S", 2),)), ("S",), {"S": ("zero", "one")}
    )
    bob_meas = measurement_from_vectors(("S", "M", "A"), bob_basis, complement_label="other")
    bob_labels = tuple(label for label, _ in bob_basis) + ("other",)
    steps = (
        Prepare("S", (complex(SQ(0.5)), complex(SQ(0.5))), "t:00"),
        MeasureRecord("Alice", alice_meas, "M", "A", "coherent", "t:10"),
        MeasureRecord("Bob", bob_meas, "EB", "B", "announced", "t:20"),
    )
    protocol = Protocol(layout, steps, None, name="alice-bob")

    pad = np.zeros(bdim, dtype=complex)
    pad[0] = 1.0
    psi_s = _kron(PLUS, E0, E0, pad, pad)
    agree = (_kron(E0, E0, E0) + _kron(E1, E1, E1)) / SQ(2)
    phi_sma = _kron(agree, pad, pad)
    # the same state re-expressed over parity and memory-diagonal factors
    bell_plus = (_kron(E0, E0) + _kron(E1, E1)) / SQ(2)
    bell_minus = (_kron(E0, E0) - _kron(E1, E1)) / SQ(2)
    phi_bell = 0.5 * _kron(np.kron(bell_plus, E0 + E1) + np.kron(bell_minus, E0 - E1), pad, pad)

    references = {
        "psi_S": ReferenceState("psi_S", 1, PureState(layout, psi_s)),
        "phi_SMA": ReferenceState("phi_SMA", 2, PureState(layout, phi_sma)),
        "phi_SMA_bell": ReferenceState("phi_SMA_bell", 2, PureState(layout, phi_bell)),
    }
    agents = (
        AgentSpec("Alice", "m", "A", ("zero", "one"), ("zero", "one")),
        AgentSpec("Bob", "b", "B", bob_labels, bob_labels),
    )
    labels: dict[str, tuple[str, ...]] = dict(AB_REGISTER_LABELS)
    filler = tuple(f"_unused{k}" for k in range(n_out, bdim))
    labels["EB"] = bob_labels + filler
    labels["B"] = bob_labels + filler
    named = {
        "bob": bob_meas,
        "record_m": computational_measurement(layout, ("A",), {"A": ("zero", "one")}),
        "record_b": computational_measurement(layout, ("B",), {"B": labels["B"]}),
    }
    return ScenarioBundle(
        name="alice-bob",
        protocol=protocol,
        agents=agents,
        register_labels=labels,
        references=references,
        named_measurements=named,
    )


SCENARIO_BUILDERS = {
    "alice-bob": build_alice_bob,
    "fr": build_fr,
    "fr-alt-prep": build_fr_alt_prep,
    "casino": build_casino,
}
