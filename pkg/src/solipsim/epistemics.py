"""Agents' observational records, their inference rules, and a per-step
audit of whole reasoning chains.

The reasoning model has three moving parts:

* a record collapse: an agent treats every value in its observational
  record as definite, implemented as conditioning (formal collapse) of
  the globally evolved pure state on the recording registers;
* rule Q: Born-rule prediction from the collapsed state, with certainty
  asserted only for probability-1 outcomes;
* rule C: inheriting the conclusion of an imagined rational agent. With
  the intersubjective clause off, the imagined agent reasons at its own
  vantage and its conclusions are adopted verbatim, which is exactly the
  fallible move. With the clause on, the reasoner's own record is
  injected into the imagined premises, and the rule collapses into a
  plain rule-Q evaluation of the union record.

The audit marks an inference compliant when its premises hold with
certainty under the reasoner's own collapsed state, the state conditioned
on all premises keeps the reasoner's memory register at its recorded
value, and the concluded probability matches the asserted one. A separate
flag marks inferences as scripted when the protocol itself later measures
the reasoner's memory as a quantum system, which strips the reasoning of
any operational, bet-settling content.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ImpossibleEventError, RecordError, UnevaluableError
from .hilbert import (
    ProjectiveMeasurement,
    PureState,
    born,
    computational_measurement,
    condition,
    projector,
    reduced_density,
    trace_distance,
)
from .protocol import MeasureRecord, continue_unitary, run_unitary
from .scenarios import AgentSpec, ScenarioBundle

CERTAINTY_TOL = 1e-10

PROVENANCES = ("observed", "inferred", "imagined")


@dataclass(frozen=True)
class RecordEntry:
    """One definite value in an agent's observational record.

    `step` is the protocol prefix length at which the value is on record
    (the index just after the writing step).
    """

    observable: str
    value: str
    step: int
    provenance: str = "observed"

    def __post_init__(self) -> None:
        if self.provenance not in PROVENANCES:
            raise RecordError(f"provenance must be one of {PROVENANCES}")


@dataclass(frozen=True)
class ObservationalRecord:
    """Single-valued map from observables to recorded values.

    Single-valuedness is structural: holding x = a excludes holding any
    x = b alongside it, so a record can never assert both.
    """

    agent: str
    entries: tuple[RecordEntry, ...]

    def __post_init__(self) -> None:
        seen = {}
        for e in self.entries:
            if e.observable in seen and seen[e.observable] != e.value:
                raise RecordError(
                    f"record for {self.agent} holds two values for {e.observable!r}:"
                    f" {seen[e.observable]!r} and {e.value!r}"
                )
            seen[e.observable] = e.value

    def value(self, observable: str) -> Optional[str]:
        for e in self.entries:
            if e.observable == observable:
                return e.value
        return None

    def max_step(self) -> int:
        return max((e.step for e in self.entries), default=0)

    def union(self, other: "ObservationalRecord", provenance: str = "imagined") -> "ObservationalRecord":
        """This record extended by the other's entries (re-tagged), with
        conflicting values rejected structurally."""
        entries = list(self.entries)
        have = {e.observable: e.value for e in entries}
        for e in other.entries:
            if e.observable in have:
                if have[e.observable] != e.value:
                    raise ImpossibleEventError(
                        "conflict: outer perspective upheld"
                        f" (observable {e.observable!r}: {have[e.observable]!r}"
                        f" vs {e.value!r})"
                    )
                continue
            entries.append(replace(e, provenance=provenance))
        return ObservationalRecord(self.agent, tuple(entries))


def record_of(agent: str, assignments: dict[str, tuple[str, int]]) -> ObservationalRecord:
    """Convenience builder: observable -> (value, step)."""
    return ObservationalRecord(
        agent,
        tuple(RecordEntry(obs, val, step) for obs, (val, step) in assignments.items()),
    )


@dataclass(frozen=True)
class Event:
    """A measurement outcome pinned to a step prefix: `measurement` yields
    `label`, definite once `step` steps have run."""

    measurement: ProjectiveMeasurement
    label: str
    step: int
    description: str = ""


@dataclass(frozen=True)
class StepMeasurement:
    """A measurement pinned to a step prefix, outcome left open."""

    measurement: ProjectiveMeasurement
    step: int


@dataclass(frozen=True)
class Premise:
    event: Event
    provenance: str = "observed"

    def __post_init__(self) -> None:
        if self.provenance not in PROVENANCES:
            raise RecordError(f"provenance must be one of {PROVENANCES}")


@dataclass(frozen=True)
class Prediction:
    probability: float
    certain: bool


@dataclass(frozen=True)
class Inference:
    """One reasoning step: premises in, a probability claim out.

    `adopts` distinguishes claims the reasoner asserts in its own voice
    from attributions ("that agent would conclude ..."), which are audited
    against the imagined agent's vantage instead of the reasoner's.
    """

    rule: str
    premises: tuple[Premise, ...]
    conclusion: Event
    asserted_probability: float
    sub_chain: Optional["ReasoningChain"] = None
    intinf: bool = False
    adopts: bool = True
    description: str = ""

    def __post_init__(self) -> None:
        if self.rule not in ("Q", "C"):
            raise RecordError(f"rule must be Q or C, got {self.rule!r}")
        if not 0.0 <= self.asserted_probability <= 1.0:
            raise RecordError("asserted probability outside [0, 1]")


@dataclass(frozen=True)
class ReasoningChain:
    agent: str
    record: ObservationalRecord
    at_step: int
    inferences: tuple[Inference, ...]


@dataclass(frozen=True)
class AuditVerdict:
    """Audit row for one inference.

    `empirically_sound` summarizes what the protocol's own announcements
    can say about the claim: "scripted" when the reasoner's memory is
    later measured as a quantum system (the run was going to produce
    these motions regardless, so they settle nothing), otherwise "sound"
    or "unsound" by comparing the asserted probability with the
    conditionally evaluated one. The independent disclosure oracle lives
    in the disclosure module.
    """

    index: int
    rule: str
    conclusion: str
    asserted_probability: float
    actual_probability: Optional[float]
    sps_compliant: bool
    scripted: bool
    empirically_sound: str
    note: str = ""


@dataclass(frozen=True)
class NestedImagination:
    """An imagined agent who in turn imagines another agent."""

    agent: str
    record: ObservationalRecord
    nested: Optional["NestedImagination"] = None


# ---------------------------------------------------------------------------
# record collapse and rule Q


def record_measurement(bundle: ScenarioBundle, observable: str) -> ProjectiveMeasurement:
    """Computational readout of the register holding `observable`'s record,
    labelled with the observable's value names."""
    agent = bundle.agent_for_observable(observable)
    layout = bundle.protocol.layout
    mdim = layout.dim(agent.memory)
    values = list(agent.observable_values)
    for k in range(len(values), mdim):
        values.append(f"_unused{k}")
    return computational_measurement(layout, (agent.memory,), {agent.memory: tuple(values)})


def sps_collapse(bundle: ScenarioBundle, record: ObservationalRecord, at_step: int) -> PureState:
    """Global state at `at_step` conditioned on every recorded value.

    Raises an impossible-event error when the record is inconsistent with
    the protocol (some entry has probability zero).
    """
    for e in record.entries:
        if e.step > at_step:
            raise RecordError(
                f"record entry {e.observable}={e.value} at step {e.step} postdates"
                f" the reasoning step {at_step}"
            )
    state = run_unitary(bundle.protocol, at_step)
    for e in record.entries:
        meas = record_measurement(bundle, e.observable)
        _, state = condition(state, meas, e.value)
    return state


def event_probability(
    bundle: ScenarioBundle, record: ObservationalRecord, at_step: int, event: Event
) -> float:
    """Probability of `event` under the collapsed record state, evolving
    forward when the event postdates the reasoning step."""
    for name in event.measurement.target:
        if name not in bundle.protocol.layout:
            raise UnevaluableError(
                f"event targets register {name!r} absent from the protocol"
            )
    state = sps_collapse(bundle, record, at_step)
    prefix = max(at_step, event.step)
    state = continue_unitary(bundle.protocol, state, at_step, prefix)
    return born(state, event.measurement)[event.label]


def infer_q(
    bundle: ScenarioBundle,
    record: ObservationalRecord,
    at_step: int,
    future_meas: Event | StepMeasurement,
    label: Optional[str] = None,
) -> Prediction:
    """Rule Q: Born prediction from the collapsed record state.

    `future_meas` is an Event (label embedded) or a StepMeasurement with
    the outcome named separately in `label`.
    """
    if isinstance(future_meas, Event):
        event = future_meas if label is None else replace(future_meas, label=label)
    else:
        if label is None:
            raise RecordError("a StepMeasurement needs an explicit outcome label")
        event = Event(future_meas.measurement, label, future_meas.step)
    p = event_probability(bundle, record, at_step, event)
    return Prediction(p, p >= 1.0 - CERTAINTY_TOL)


def check_premise_sps(
    bundle: ScenarioBundle, record: ObservationalRecord, at_step: int, premise: Premise
) -> bool:
    """True iff the premise holds with certainty under the collapsed state.

    Retrodictive premises (event step at or before the reasoning step) are
    evaluated on the current state via their persisting record registers;
    predictive ones after forward evolution. A premise whose event sits on
    registers the protocol does not contain is unevaluable and raises.
    """
    p = event_probability(bundle, record, at_step, premise.event)
    return p >= 1.0 - CERTAINTY_TOL


# ---------------------------------------------------------------------------
# rule C


def announced_events(bundle: ScenarioBundle, after_step: int) -> list[Event]:
    """One Event per announced outcome label at or after `after_step`."""
    events = []
    steps = bundle.protocol.steps
    for idx in range(after_step, len(steps)):
        step = steps[idx]
        if isinstance(step, MeasureRecord) and step.coherence == "announced":
            agent = bundle.agent(step.agent)
            meas = record_measurement(bundle, agent.observable)
            for value in agent.observable_values:
                events.append(
                    Event(meas, value, idx + 1, f"{agent.observable}={value}")
                )
    return events


def infer_c(
    bundle: ScenarioBundle,
    outer_record: ObservationalRecord,
    inner_agent: str,
    imagined_record: ObservationalRecord,
    at_step: int,
    intinf: bool,
    nested: Optional[NestedImagination] = None,
) -> list[Inference]:
    """Rule C: inherit the predictions of an imagined agent.

    With `intinf` off, the imagined agent reasons at its own vantage (the
    latest step in its imagined record) and every announced-outcome
    prediction it makes is inherited verbatim, however much the world has
    moved on since. With `intinf` on, the reasoner's record is injected
    into the imagined premises; the imagined agent then reasons at the
    reasoner's vantage from the union record, so every inherited number
    equals a direct rule-Q evaluation of that union. An inconsistent union
    raises an impossible-event error: the outer perspective is upheld.

    `nested` lets the imagined agent imagine further agents; the intinf
    setting applies uniformly at every level.
    """
    bundle.agent(inner_agent)
    if intinf:
        union = outer_record.union(imagined_record)
        level = nested
        while level is not None:
            union = union.union(level.record)
            level = level.nested
        vantage = at_step
        base_record = union
        try:
            sps_collapse(bundle, base_record, vantage)
        except ImpossibleEventError as exc:
            raise ImpossibleEventError(
                f"conflict: outer perspective upheld ({exc})"
            ) from exc
    else:
        if nested is not None:
            inner_results = infer_c(
                bundle,
                imagined_record,
                nested.agent,
                nested.record,
                at_step=imagined_record.max_step(),
                intinf=False,
                nested=nested.nested,
            )
            return [
                replace(
                    inf,
                    premises=tuple(
                        Premise(e_to_event(bundle, e), "imagined")
                        for e in imagined_record.entries
                    )
                    + inf.premises,
                    description=f"inherited via {inner_agent}: {inf.description}",
                )
                for inf in inner_results
            ]
        vantage = imagined_record.max_step()
        base_record = imagined_record
    premises = tuple(
        Premise(e_to_event(bundle, e), "imagined") for e in imagined_record.entries
    ) + (
        tuple(Premise(e_to_event(bundle, e), "observed") for e in outer_record.entries)
        if intinf
        else ()
    )
    out = []
    for event in announced_events(bundle, vantage):
        pred = infer_q(bundle, base_record, vantage, event)
        out.append(
            Inference(
                rule="C",
                premises=premises,
                conclusion=event,
                asserted_probability=pred.probability,
                intinf=intinf,
                adopts=True,
                description=f"{inner_agent} predicts {event.description}",
            )
        )
    return out


def e_to_event(bundle: ScenarioBundle, entry: RecordEntry) -> Event:
    """A record entry as a measurable event on its recording register."""
    meas = record_measurement(bundle, entry.observable)
    return Event(meas, entry.value, entry.step, f"{entry.observable}={entry.value}")


# ---------------------------------------------------------------------------
# audit


def _scripted(bundle: ScenarioBundle, agent: AgentSpec, at_step: int) -> bool:
    """True iff a later step measures the reasoner's memory as a target."""
    for step in bundle.protocol.steps[at_step:]:
        if isinstance(step, MeasureRecord) and agent.memory in step.measurement.target:
            return True
    return False


def _self_state_ok(
    bundle: ScenarioBundle,
    chain: ReasoningChain,
    inference: Inference,
) -> tuple[bool, str]:
    """Condition the collapsed state on all premises and check that the
    reasoner's memory register still sits exactly at its recorded value."""
    agent = bundle.agent(chain.agent)
    own_value = chain.record.value(agent.observable)
    if own_value is None:
        return True, ""
    try:
        state = sps_collapse(bundle, chain.record, chain.at_step)
    except ImpossibleEventError as exc:
        return False, f"record inconsistent: {exc}"
    prefix = chain.at_step
    for premise in sorted(inference.premises, key=lambda p: p.event.step):
        target_prefix = max(prefix, premise.event.step)
        state = continue_unitary(bundle.protocol, state, prefix, target_prefix)
        prefix = target_prefix
        try:
            _, state = condition(state, premise.event.measurement, premise.event.label)
        except ImpossibleEventError:
            return False, f"premise {premise.event.description or premise.event.label!r} impossible"
    rho = reduced_density(state, (agent.memory,))
    k = agent.observable_values.index(own_value)
    mdim = bundle.protocol.layout.dim(agent.memory)
    ref = np.zeros(mdim, dtype=complex)
    ref[k] = 1.0
    dist = trace_distance(rho, projector(ref))
    if dist > CERTAINTY_TOL:
        return False, (
            f"premises place the reasoner's own memory {dist:.3g} away from"
            f" its recorded value {own_value!r}"
        )
    return True, ""


def audit_chain(bundle: ScenarioBundle, chain: ReasoningChain) -> list[AuditVerdict]:
    """Per-inference verdicts for a whole reasoning chain."""
    agent = bundle.agent(chain.agent)
    scripted = _scripted(bundle, agent, chain.at_step)
    verdicts = []
    for i, inf in enumerate(chain.inferences):
        notes = []
        premises_ok = True
        for premise in inf.premises:
            try:
                ok = check_premise_sps(bundle, chain.record, chain.at_step, premise)
            except ImpossibleEventError:
                ok = False
            if not ok:
                premises_ok = False
                notes.append(
                    f"premise {premise.event.description or premise.event.label}"
                    " not certain under the reasoner's record"
                )
        self_ok, self_note = _self_state_ok(bundle, chain, inf)
        if not self_ok:
            notes.append(self_note)

        actual: Optional[float]
        if inf.adopts:
            try:
                actual = event_probability(bundle, chain.record, chain.at_step, inf.conclusion)
            except ImpossibleEventError:
                actual = 0.0
            conclusion_ok = abs(actual - inf.asserted_probability) <= CERTAINTY_TOL
            if not conclusion_ok:
                notes.append(
                    f"asserted {inf.asserted_probability:.6g} but the record"
                    f" supports {actual:.6g}"
                )
        else:
            # attribution: validate the imagined agent's chain at its own vantage
            if inf.sub_chain is None:
                raise RecordError("attributed inference lacks its imagined chain")
            sub = audit_chain(bundle, inf.sub_chain)
            conclusion_ok = all(v.sps_compliant for v in sub)
            actual = sub[-1].actual_probability if sub else None
            if not conclusion_ok:
                notes.append("the attributed chain itself fails its audit")

        compliant = premises_ok and self_ok and conclusion_ok
        if scripted:
            empirical = "scripted"
        elif actual is None:
            empirical = "sound" if conclusion_ok else "unsound"
        else:
            empirical = (
                "sound" if abs(actual - inf.asserted_probability) <= CERTAINTY_TOL else "unsound"
            )
        verdicts.append(
            AuditVerdict(
                index=i,
                rule=inf.rule,
                conclusion=inf.conclusion.description or inf.conclusion.label,
                asserted_probability=inf.asserted_probability,
                actual_probability=actual,
                sps_compliant=compliant,
                scripted=scripted,
                empirically_sound=empirical,
                note="; ".join(notes),
            )
        )
    return verdicts


# ---------------------------------------------------------------------------
# the canonical two-lab chains


def fr_canonical_chains(bundle: ScenarioBundle) -> dict[str, ReasoningChain]:
    """The three reasoning chains of the halting two-lab protocol, as the
    agents voice them in the round that announces (okbar, ok)."""
    nm = bundle.named_measurements
    r_meas = record_measurement(bundle, "r")
    z_meas = record_measurement(bundle, "z")
    wbar_meas = record_measurement(bundle, "wbar")
    w_meas = record_measurement(bundle, "w")
    l_meas = nm["L_state"]

    r_tails = lambda step: Event(r_meas, "tails", step, "r=tails")
    z_up = lambda step: Event(z_meas, "+1/2", step, "z=+1/2")
    l_fail = lambda step: Event(l_meas, "fail", step, "inner lab in its fail state")
    w_fail = Event(w_meas, "fail", 7, "w=fail")
    w_ok = Event(w_meas, "ok", 7, "w=ok")
    wbar_ok = Event(wbar_meas, "okbar", 6, "wbar=okbar")

    fbar_record = ObservationalRecord("Fbar", (RecordEntry("r", "tails", 2),))
    fbar_chain = ReasoningChain(
        agent="Fbar",
        record=fbar_record,
        at_step=3,
        inferences=(
            Inference(
                rule="Q",
                premises=(Premise(r_tails(2), "observed"),),
                conclusion=l_fail(5),
                asserted_probability=1.0,
                description="tails sends the spin diagonal, so the inner lab lands in fail",
            ),
            Inference(
                rule="Q",
                premises=(Premise(l_fail(5), "inferred"),),
                conclusion=w_fail,
                asserted_probability=1.0,
                description="a fail-state lab announces fail",
            ),
        ),
    )

    f_record = ObservationalRecord("F", (RecordEntry("z", "+1/2", 5),))
    imagined_fbar = ReasoningChain(
        agent="Fbar",
        record=ObservationalRecord(
            "Fbar", (RecordEntry("r", "tails", 2, "imagined"),)
        ),
        at_step=3,
        inferences=fbar_chain.inferences,
    )
    f_chain = ReasoningChain(
        agent="F",
        record=f_record,
        at_step=5,
        inferences=(
            Inference(
                rule="Q",
                premises=(Premise(z_up(5), "observed"),),
                conclusion=r_tails(5),
                asserted_probability=1.0,
                description="spin up only occurs on the tails branch",
            ),
            Inference(
                rule="C",
                premises=(Premise(r_tails(5), "inferred"),),
                conclusion=w_fail,
                asserted_probability=1.0,
                sub_chain=imagined_fbar,
                adopts=False,
                description="the coin agent, holding tails, would predict w=fail",
            ),
            Inference(
                rule="C",
                premises=(
                    Premise(r_tails(5), "inferred"),
                    Premise(l_fail(5), "imagined"),
                ),
                conclusion=w_fail,
                asserted_probability=1.0,
                sub_chain=imagined_fbar,
                adopts=True,
                description="adopting the imagined fail-branch as one's own situation",
            ),
        ),
    )

    wbar_record = ObservationalRecord("Wbar", (RecordEntry("wbar", "okbar", 6),))
    wbar_chain = ReasoningChain(
        agent="Wbar",
        record=wbar_record,
        at_step=6,
        inferences=(
            Inference(
                rule="Q",
                premises=(Premise(Event(wbar_meas, "okbar", 6, "wbar=okbar"), "observed"),),
                conclusion=z_up(6),
                asserted_probability=1.0,
                description="okbar excludes the z=-1/2 component",
            ),
            Inference(
                rule="Q",
                premises=(Premise(wbar_ok, "observed"),),
                conclusion=w_ok,
                asserted_probability=0.5,
                description="the halting announcement is an even bet",
            ),
            Inference(
                rule="Q",
                premises=(Premise(z_up(6), "inferred"),),
                conclusion=r_tails(6),
                asserted_probability=1.0,
                description="retrodicting the coin from the inferred spin",
            ),
            Inference(
                rule="C",
                premises=(Premise(r_tails(6), "inferred"),),
                conclusion=w_fail,
                asserted_probability=1.0,
                sub_chain=imagined_fbar,
                adopts=True,
                description="inheriting the coin agent's w=fail through the inferred tails",
            ),
        ),
    )
    return {"Fbar": fbar_chain, "F": f_chain, "Wbar": wbar_chain}
