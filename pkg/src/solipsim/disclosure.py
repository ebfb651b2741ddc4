"""Virtual disclosure: a hypothetical classical-basis copy of an agent's
record onto an external flag register, used as an empirical soundness
oracle for reasoning that the protocol itself never publishes.

The copy is a unitary on (memory, flag) sending |k, blank> to |k, k>; it
is the natural completion of the partial isometry that copies each
classical-basis memory state onto the flag. Inserting it after the step
that writes the record, and before any later step measures that memory as
a quantum system, leaves all announced physics of commuting measurements
unchanged while making the record conditionally accessible from outside.

A conclusion asserted with certainty is then sound exactly when its
conditional probability given the realized flag value is 1 on the
completed run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DisclosureError
from .hilbert import (
    Isometry,
    ProjectiveMeasurement,
    PureState,
    RegisterLayout,
    born,
    complete_unitary,
    computational_measurement,
    condition,
)
from .protocol import (
    ApplyIsometry,
    MeasureRecord,
    Protocol,
    continue_unitary,
    run_unitary,
    sample_many,
)
from .epistemics import CERTAINTY_TOL, Event, ReasoningChain, event_probability
from .scenarios import ReferenceState, ScenarioBundle


@dataclass(frozen=True)
class DisclosurePoint:
    """Where a copy of whose record leaves the experiment.

    `after_step` is the protocol prefix after which the copy runs; it must
    lie at or after the step writing the agent's record and no later than
    the first subsequent step that measures that memory as a target.
    """

    agent: str
    after_step: int
    flag_register: str = "G"
    flag_dim: Optional[int] = None


def _copy_unitary(mem_dim: int, flag_dim: int) -> np.ndarray:
    """Unitary on memory (x) flag writing the memory index into the flag."""
    assigned = {}
    for k in range(mem_dim):
        col = np.zeros(mem_dim * flag_dim, dtype=complex)
        col[k * flag_dim + min(k, flag_dim - 1)] = 1.0
        assigned[k * flag_dim + 0] = col
    return complete_unitary(mem_dim * flag_dim, assigned)


def valid_disclosure_window(bundle: ScenarioBundle, agent_name: str) -> tuple[int, int]:
    """Allowed after_step range [lo, hi] for disclosing this agent."""
    agent = bundle.agent(agent_name)
    steps = bundle.protocol.steps
    lo = None
    hi = len(steps)
    for i, step in enumerate(steps):
        if isinstance(step, MeasureRecord):
            if step.agent == agent_name and step.memory == agent.memory and lo is None:
                lo = i + 1
            elif lo is not None and agent.memory in step.measurement.target:
                hi = i
                break
    if lo is None:
        raise DisclosureError(f"agent {agent_name!r} never writes a record to disclose")
    return lo, hi


def default_disclosure_point(bundle: ScenarioBundle, agent_name: str) -> DisclosurePoint:
    """Earliest valid disclosure: right after the record is written."""
    lo, _ = valid_disclosure_window(bundle, agent_name)
    return DisclosurePoint(agent_name, lo)


def insert_disclosure(bundle: ScenarioBundle, point: DisclosurePoint) -> ScenarioBundle:
    """New bundle with the copy step spliced in and the flag register
    appended to the layout; reference checkpoints are re-embedded and
    their prefixes shifted past the insertion."""
    agent = bundle.agent(point.agent)
    lo, hi = valid_disclosure_window(bundle, point.agent)
    if not lo <= point.after_step <= hi:
        raise DisclosureError(
            f"disclosure of {point.agent!r} at step {point.after_step} is outside"
            f" the valid window [{lo}, {hi}]; later placements sit inside the"
            " announced region that measures the record itself"
        )
    old = bundle.protocol
    if point.flag_register in old.layout:
        raise DisclosureError(f"flag register {point.flag_register!r} already in use")
    mem_dim = old.layout.dim(agent.memory)
    flag_dim = point.flag_dim if point.flag_dim is not None else mem_dim
    layout = old.layout.extended(point.flag_register, flag_dim)
    sub = RegisterLayout(((agent.memory, mem_dim), (point.flag_register, flag_dim)))
    copy_step = ApplyIsometry(
        Isometry(sub, sub, _copy_unitary(mem_dim, flag_dim)),
        (agent.memory, point.flag_register),
        time_tag="disclose",
    )
    steps = old.steps[: point.after_step] + (copy_step,) + old.steps[point.after_step :]
    protocol = Protocol(layout, steps, old.halting, name=f"{old.name}+disclose:{point.agent}")

    blank_flag = np.zeros(flag_dim, dtype=complex)
    blank_flag[0] = 1.0
    references = {}
    for name, ref in bundle.references.items():
        amps = np.kron(ref.state.amplitudes, blank_flag)
        prefix = ref.prefix + (1 if ref.prefix > point.after_step else 0)
        references[name] = ReferenceState(name, prefix, PureState(layout, amps))

    flag_labels = agent.observable_values[:flag_dim]
    flag_labels = flag_labels + tuple(
        f"_unused{k}" for k in range(len(flag_labels), flag_dim)
    )
    labels = dict(bundle.register_labels)
    labels[point.flag_register] = flag_labels
    return ScenarioBundle(
        name=f"{bundle.name}+disclose:{point.agent}",
        protocol=protocol,
        agents=bundle.agents,
        register_labels=labels,
        references=references,
        named_measurements=dict(bundle.named_measurements),
        dispute_rule=bundle.dispute_rule,
    )


def flag_measurement(disclosed: ScenarioBundle, flag_register: str = "G") -> ProjectiveMeasurement:
    labels = disclosed.register_labels[flag_register]
    return computational_measurement(
        disclosed.protocol.layout, (flag_register,), {flag_register: labels}
    )


def evaluate_conclusion(
    disclosed: ScenarioBundle,
    flag_value: str | int,
    event: Event,
    flag_register: str = "G",
) -> float:
    """P(event | flag = flag_value) on the completed disclosed run."""
    labels = disclosed.register_labels[flag_register]
    label = labels[flag_value] if isinstance(flag_value, int) else flag_value
    if label not in labels:
        raise DisclosureError(f"flag value {label!r} not among {labels}")
    final = run_unitary(disclosed.protocol)
    _, conditioned = condition(final, flag_measurement(disclosed, flag_register), label)
    return born(conditioned, event.measurement)[event.label]


@dataclass(frozen=True)
class SoundnessVerdict:
    """Disclosure verdict for one inference; `sound` is None when the
    inference asserts no certainty and the oracle has nothing to check."""

    index: int
    conclusion: str
    asserted_probability: float
    conditional_probability: Optional[float]
    sound: Optional[bool]
    note: str = ""


def vdis_oracle(
    bundle: ScenarioBundle, chain: ReasoningChain, point: DisclosurePoint
) -> list[SoundnessVerdict]:
    """Soundness of each certainty conclusion in the chain, given the
    disclosure of the chain agent's record at `point`.

    The realized flag value is the chain's own recorded value for the
    agent's observable. Attributed conclusions (claims about what another
    agent would conclude) recurse into the imagined chain under that
    agent's earliest disclosure.
    """
    if chain.agent != point.agent:
        raise DisclosureError(
            f"chain belongs to {chain.agent!r} but the disclosure point is for {point.agent!r}"
        )
    agent = bundle.agent(point.agent)
    flag_value = chain.record.value(agent.observable)
    if flag_value is None:
        raise DisclosureError(
            f"chain record has no value for {agent.observable!r}; nothing to disclose"
        )
    disclosed = insert_disclosure(bundle, point)
    verdicts = []
    for i, inf in enumerate(chain.inferences):
        certain = inf.asserted_probability >= 1.0 - CERTAINTY_TOL
        if not certain:
            verdicts.append(
                SoundnessVerdict(
                    i, inf.conclusion.description or inf.conclusion.label,
                    inf.asserted_probability, None, None,
                    "no certainty asserted; outside the oracle's scope",
                )
            )
            continue
        if inf.adopts:
            p = evaluate_conclusion(disclosed, flag_value, inf.conclusion, point.flag_register)
            verdicts.append(
                SoundnessVerdict(
                    i, inf.conclusion.description or inf.conclusion.label,
                    inf.asserted_probability, p, p >= 1.0 - CERTAINTY_TOL,
                )
            )
        else:
            if inf.sub_chain is None:
                raise DisclosureError("attributed inference lacks its imagined chain")
            inner_point = default_disclosure_point(bundle, inf.sub_chain.agent)
            inner = vdis_oracle(bundle, inf.sub_chain, inner_point)
            checked = [v for v in inner if v.sound is not None]
            sound = all(v.sound for v in checked)
            verdicts.append(
                SoundnessVerdict(
                    i, inf.conclusion.description or inf.conclusion.label,
                    inf.asserted_probability,
                    checked[-1].conditional_probability if checked else None,
                    sound,
                    "attribution judged by disclosing the imagined agent",
                )
            )
    return verdicts


def announced_soundness(
    bundle: ScenarioBundle,
    chain: ReasoningChain,
    seed: Optional[int] = None,
    shots: int = 0,
) -> list[SoundnessVerdict]:
    """Soundness of a chain whose agent already sits in the announced,
    operational layer: each conclusion is checked against the conditional
    evaluation of the agent's record, optionally cross-checked against
    sampled announced frequencies (reported in the note)."""
    freq_note = {}
    if shots > 0 and seed is not None:
        traces = sample_many(bundle.protocol, seed, shots)
        agent = bundle.agent(chain.agent)
        own = chain.record.value(agent.observable)
        matching = [t for t in traces if t.as_dict().get(chain.agent) == own]
        for other in bundle.protocol.measuring_agents():
            if other == chain.agent:
                continue
            counts: dict[str, int] = {}
            for t in matching:
                lab = t.as_dict().get(other)
                if lab is not None:
                    counts[lab] = counts.get(lab, 0) + 1
            if counts and matching:
                freq_note[other] = {k: v / len(matching) for k, v in sorted(counts.items())}
    verdicts = []
    for i, inf in enumerate(chain.inferences):
        actual = event_probability(bundle, chain.record, chain.at_step, inf.conclusion)
        sound = abs(actual - inf.asserted_probability) <= CERTAINTY_TOL
        note = f"announced frequencies given the record: {freq_note}" if freq_note else ""
        verdicts.append(
            SoundnessVerdict(
                i, inf.conclusion.description or inf.conclusion.label,
                inf.asserted_probability, actual, sound, note,
            )
        )
    return verdicts


def decohered_born(
    bundle: ScenarioBundle,
    point: DisclosurePoint,
    meas: ProjectiveMeasurement,
) -> dict[str, float]:
    """Outcome distribution after a formal decoherence of the agent's
    memory in its classical basis at the disclosure point: run each
    memory-basis branch to the end separately and mix the statistics."""
    agent = bundle.agent(point.agent)
    protocol = bundle.protocol
    state = run_unitary(protocol, point.after_step)
    mem_labels = bundle.register_labels[agent.memory]
    mem_meas = computational_measurement(
        protocol.layout, (agent.memory,), {agent.memory: mem_labels}
    )
    branch_probs = born(state, mem_meas)
    totals = {label: 0.0 for label in meas.labels}
    for mem_label, p in branch_probs.items():
        if p <= 0.0:
            continue
        _, branch = condition(state, mem_meas, mem_label)
        branch = continue_unitary(protocol, branch, point.after_step, len(protocol.steps))
        for label, q in born(branch, meas).items():
            totals[label] += p * q
    return totals
