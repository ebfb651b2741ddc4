"""Step-sequence protocols over a register layout, and their execution.

A protocol is a linear script of four step kinds:

* Prepare      -- load amplitudes into a blank register,
* ApplyIsometry -- any isometric evolution on named targets,
* MeasureRecord -- an agent measures targets and the outcome is written
                   unitarily into a device register and the agent's
                   memory register (one branch per outcome),
* Send          -- custody transfer of a register between agents; a no-op
                   on the state, kept for bookkeeping and narration.

Measurement here is entanglement, never collapse: MeasureRecord applies the
isometry  sum_k (P_k tensor |k><blank|_device tensor |k><blank|_memory).
Steps tagged `announced` additionally publish the outcome, which is where
sampling draws and halting conditions read from. `coherent` steps stay
private to the protocol's interior and are never sampled.

Sampled runs collapse only at announced steps, by measuring the announcing
agent's memory register in its computational basis. Identical announced
prefixes share the post-conditioning state via memoization, so a many-shot
ensemble costs one state-vector evolution per distinct branch.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import BlankRegisterError, ProtocolError
from .hilbert import (
    NORM_TOL,
    Isometry,
    ProjectiveMeasurement,
    PureState,
    RegisterLayout,
    _restore,
    _targets_front,
    blank_state,
    born,
    condition,
    embed_apply,
)

RNG_ALGORITHM = "philox4x64"


@dataclass(frozen=True)
class Prepare:
    """Load an amplitude vector into a blank register."""

    register: str
    amplitudes: tuple[complex, ...]
    time_tag: str = ""


@dataclass(frozen=True)
class ApplyIsometry:
    """Apply an isometry to the named target registers."""

    isometry: Isometry
    targets: tuple[str, ...]
    time_tag: str = ""


@dataclass(frozen=True)
class MeasureRecord:
    """Agent measures `measurement.target`; outcome k is written into
    basis state k of both the device register and the memory register."""

    agent: str
    measurement: ProjectiveMeasurement
    device: str
    memory: str
    coherence: str = "coherent"
    time_tag: str = ""

    def __post_init__(self) -> None:
        if self.coherence not in ("coherent", "announced"):
            raise ProtocolError(f"coherence must be coherent|announced, got {self.coherence!r}")


@dataclass(frozen=True)
class Send:
    """Hand a register from one agent to another. State is untouched."""

    register: str
    from_agent: str
    to_agent: str
    time_tag: str = ""


Step = Prepare | ApplyIsometry | MeasureRecord | Send


@dataclass(frozen=True)
class RoundTrace:
    """Announced outcomes of one protocol run, in announcement order."""

    announced: tuple[tuple[str, str], ...]
    round_index: int = 0

    def as_dict(self) -> dict[str, str]:
        return dict(self.announced)

    def outcome(self, agent: str) -> str:
        for name, label in self.announced:
            if name == agent:
                return label
        raise ProtocolError(f"no announced outcome for agent {agent!r}")


@dataclass(frozen=True)
class RoundsResult:
    """Outcome of repeating a protocol until its halting condition fires."""

    halted: bool
    rounds_run: int
    final_trace: RoundTrace


@dataclass(frozen=True)
class Protocol:
    layout: RegisterLayout
    steps: tuple[Step, ...]
    halting: Optional[Callable[[dict[str, str]], bool]] = None
    name: str = ""

    def __post_init__(self) -> None:
        self._validate()

    def _validate(self) -> None:
        lay = self.layout
        for i, step in enumerate(self.steps):
            where = f"step {i} ({type(step).__name__})"
            if isinstance(step, Prepare):
                if step.register not in lay:
                    raise ProtocolError(f"{where}: unknown register {step.register!r}")
                if len(step.amplitudes) != lay.dim(step.register):
                    raise ProtocolError(f"{where}: amplitude length mismatch")
            elif isinstance(step, ApplyIsometry):
                for name in step.targets:
                    if name not in lay:
                        raise ProtocolError(f"{where}: unknown register {name!r}")
            elif isinstance(step, MeasureRecord):
                for name in step.measurement.target + (step.device, step.memory):
                    if name not in lay:
                        raise ProtocolError(f"{where}: unknown register {name!r}")
                if step.device in step.measurement.target or step.memory in step.measurement.target:
                    raise ProtocolError(f"{where}: device/memory may not also be a target")
                if step.device == step.memory:
                    raise ProtocolError(f"{where}: device and memory must differ")
                n = len(step.measurement.outcomes)
                if n > lay.dim(step.device) or n > lay.dim(step.memory):
                    raise ProtocolError(
                        f"{where}: {n} outcomes exceed device/memory capacity"
                    )
            elif isinstance(step, Send):
                if step.register not in lay:
                    raise ProtocolError(f"{where}: unknown register {step.register!r}")
            else:
                raise ProtocolError(f"{where}: unsupported step type")
        if self.halting is not None and not self.announced_steps():
            raise ProtocolError("halting condition requires at least one announced step")

    def announced_steps(self) -> tuple[int, ...]:
        return tuple(
            i
            for i, s in enumerate(self.steps)
            if isinstance(s, MeasureRecord) and s.coherence == "announced"
        )

    def measuring_agents(self) -> tuple[str, ...]:
        seen = []
        for s in self.steps:
            if isinstance(s, MeasureRecord) and s.agent not in seen:
                seen.append(s.agent)
        return tuple(seen)


def _blank_check(slab: np.ndarray, register: str) -> np.ndarray:
    """slab has the register's axis first; verify all mass sits at index 0."""
    off = float(np.sum(np.abs(slab[1:]) ** 2))
    if off > NORM_TOL:
        raise BlankRegisterError(
            f"register {register!r} holds weight {off!r} outside its blank state"
        )
    return slab[0]


def _apply_prepare(state: PureState, step: Prepare) -> PureState:
    lay = state.layout
    dim = lay.dim(step.register)
    vec = np.array(step.amplitudes, dtype=complex)
    if abs(float(np.linalg.norm(vec)) - 1.0) > NORM_TOL:
        raise ProtocolError(f"prepare amplitudes for {step.register!r} are not normalized")
    arr, perm = _targets_front(state, (step.register,))
    blank = _blank_check(arr, step.register)
    out = np.zeros_like(arr)
    for k in range(dim):
        out[k] = vec[k] * blank
    return PureState(lay, _restore(lay, out, perm))


def _apply_measure_record(state: PureState, step: MeasureRecord) -> PureState:
    lay = state.layout
    meas = step.measurement
    ddim = lay.dim(step.device)
    mdim = lay.dim(step.memory)
    targets = meas.target + (step.device, step.memory)
    arr, perm = _targets_front(state, targets)
    tdim = math.prod(lay.dim(n) for n in meas.target)
    arr = arr.reshape(tdim, ddim, mdim, -1)
    blank = arr[:, 0, 0, :]
    off = float(np.sum(np.abs(arr) ** 2) - np.sum(np.abs(blank) ** 2))
    if off > NORM_TOL:
        raise BlankRegisterError(
            f"device {step.device!r} or memory {step.memory!r} already written "
            f"(off-blank weight {off!r})"
        )
    out = np.zeros_like(arr)
    for k, (_, proj) in enumerate(meas.outcomes):
        out[:, k, k, :] = proj @ blank
    return PureState(lay, _restore(lay, out.reshape(tdim * ddim * mdim, -1), perm))


def apply_step(state: PureState, step: Step) -> PureState:
    if isinstance(step, Prepare):
        return _apply_prepare(state, step)
    if isinstance(step, ApplyIsometry):
        return embed_apply(step.isometry, state, step.targets)
    if isinstance(step, MeasureRecord):
        return _apply_measure_record(state, step)
    if isinstance(step, Send):
        return state
    raise ProtocolError(f"unsupported step type {type(step).__name__}")


def run_unitary(protocol: Protocol, upto: int | None = None) -> PureState:
    """Deterministic global evolution of the first `upto` steps (all if None)."""
    steps = protocol.steps if upto is None else protocol.steps[:upto]
    if upto is not None and not 0 <= upto <= len(protocol.steps):
        raise ProtocolError(f"step prefix {upto} out of range 0..{len(protocol.steps)}")
    state = blank_state(protocol.layout)
    for step in steps:
        state = apply_step(state, step)
    return state


def continue_unitary(protocol: Protocol, state: PureState, start: int, stop: int) -> PureState:
    """Evolve an intermediate state through steps [start, stop)."""
    if not 0 <= start <= stop <= len(protocol.steps):
        raise ProtocolError(f"step range {start}..{stop} out of bounds")
    for step in protocol.steps[start:stop]:
        state = apply_step(state, step)
    return state


def memory_measurement(protocol: Protocol, step: MeasureRecord) -> ProjectiveMeasurement:
    """Computational-basis readout of the memory register written by `step`,
    labelled with the step's outcome labels (plus fillers for spare levels)."""
    mdim = protocol.layout.dim(step.memory)
    labels = list(step.measurement.labels)
    for k in range(len(labels), mdim):
        labels.append(f"_unused{k}")
    outs = []
    for k, label in enumerate(labels):
        mat = np.zeros((mdim, mdim), dtype=complex)
        mat[k, k] = 1.0
        outs.append((label, mat))
    return ProjectiveMeasurement((step.memory,), tuple(outs))


class ProtocolSampler:
    """Branch-memoized sampler over a protocol's announced outcomes.

    Node key: tuple of announced labels drawn so far. Each node caches the
    global state after conditioning on that prefix and evolving up to (and
    including) the next announced step, plus that step's outcome
    distribution. Distinct shots walking the same branch reuse the cache.
    """

    def __init__(self, protocol: Protocol) -> None:
        self.protocol = protocol
        self._announced = protocol.announced_steps()
        # key -> (state_after_next_announced, step | None, next_step_index,
        #         (labels, weights) | None); the distribution is cached so
        # repeated shots on the same branch only draw a random number
        self._nodes: dict[
            tuple[str, ...],
            tuple[PureState, MeasureRecord | None, int, tuple | None],
        ] = {}

    def _advance(self, state: PureState, idx: int):
        """Run steps from idx until just after the next announced step."""
        steps = self.protocol.steps
        while idx < len(steps):
            step = steps[idx]
            state = apply_step(state, step)
            idx += 1
            if isinstance(step, MeasureRecord) and step.coherence == "announced":
                return state, step, idx
        return state, None, idx

    def _node(self, prefix: tuple[str, ...]):
        if prefix in self._nodes:
            return self._nodes[prefix]
        if not prefix:
            state, step, idx = self._advance(blank_state(self.protocol.layout), 0)
        else:
            parent_state, parent_step, parent_idx, _ = self._node(prefix[:-1])
            if parent_step is None:
                raise ProtocolError("announced prefix longer than the protocol")
            meas = memory_measurement(self.protocol, parent_step)
            _, conditioned = condition(parent_state, meas, prefix[-1])
            state, step, idx = self._advance(conditioned, parent_idx)
        if step is None:
            dist = None
        else:
            meas = memory_measurement(self.protocol, step)
            probs = born(state, meas)
            labels = tuple(step.measurement.labels)
            weights = tuple(float(probs[label]) for label in labels)
            if not math.isclose(sum(weights), 1.0, abs_tol=1e-9):
                raise ProtocolError(
                    f"announced outcome weights sum to {sum(weights)!r}"
                )
            dist = (labels, weights)
        self._nodes[prefix] = (state, step, idx, dist)
        return self._nodes[prefix]

    def outcome_distribution(self, prefix: tuple[str, ...]):
        """(step, {label: prob}) for the announced step that follows `prefix`."""
        _, step, _, dist = self._node(prefix)
        if step is None:
            return None, {}
        labels, weights = dist
        return step, dict(zip(labels, weights))

    def trace(self, rng: np.random.Generator, round_index: int = 0) -> RoundTrace:
        prefix: tuple[str, ...] = ()
        announced: list[tuple[str, str]] = []
        while True:
            _, step, _, dist = self._node(prefix)
            if step is None:
                return RoundTrace(tuple(announced), round_index)
            labels, weights = dist
            draw = float(rng.random())
            cum = 0.0
            chosen = labels[-1]
            for lab, w in zip(labels, weights):
                cum += w
                if draw < cum:
                    chosen = lab
                    break
            announced.append((step.agent, chosen))
            prefix = prefix + (chosen,)


def run_sampled(protocol: Protocol, seed: int, sampler: ProtocolSampler | None = None) -> RoundTrace:
    """One sampled run: announced steps collapse, coherent steps never do."""
    sampler = sampler or ProtocolSampler(protocol)
    rng = np.random.Generator(np.random.Philox(seed))
    return sampler.trace(rng)


def sample_many(
    protocol: Protocol,
    seed: int,
    shots: int,
    start: int = 0,
    sampler: ProtocolSampler | None = None,
) -> list[RoundTrace]:
    """`shots` independent runs on per-shot Philox streams.

    Shot i always uses stream `Philox(seed).jumped(start + i)`, so splitting
    a batch across calls changes nothing about which outcomes are drawn.
    """
    if shots < 0:
        raise ValueError(f"shots must be nonnegative, got {shots}")
    sampler = sampler or ProtocolSampler(protocol)
    base = np.random.Philox(seed)
    out = []
    for i in range(shots):
        rng = np.random.Generator(base.jumped(start + i))
        out.append(sampler.trace(rng))
    return out


def run_rounds(protocol: Protocol, seed: int, max_rounds: int) -> RoundsResult:
    """Repeat the protocol (fresh registers each round) until halting fires."""
    if protocol.halting is None:
        raise ProtocolError("protocol has no halting condition")
    if max_rounds < 1:
        raise ValueError(f"max_rounds must be >= 1, got {max_rounds}")
    sampler = ProtocolSampler(protocol)
    rng = np.random.Generator(np.random.Philox(seed))
    trace = RoundTrace((), 0)
    for i in range(max_rounds):
        trace = sampler.trace(rng, round_index=i)
        if protocol.halting(trace.as_dict()):
            return RoundsResult(True, i + 1, trace)
    return RoundsResult(False, max_rounds, trace)


# ---------------------------------------------------------------------------
# JSON protocol loader (used by the CLI's --experiment flag)


def _vec(values) -> np.ndarray:
    return np.array([complex(v) if not isinstance(v, list) else complex(v[0], v[1]) for v in values])


def protocol_from_json(doc: dict) -> Protocol:
    """Build a Protocol from a JSON document.

    Schema (informal):
      {"name": str,
       "layout": [[name, dim], ...],
       "steps": [
         {"kind": "prepare", "register": str, "amplitudes": [num | [re, im], ...], "time_tag": str},
         {"kind": "unitary", "targets": [str, ...], "matrix": [[num | [re, im], ...], ...], "time_tag": str},
         {"kind": "measure_record", "agent": str, "targets": [str, ...],
          "outcomes": [{"label": str, "vector": [...]} ...] (complement absorbs the rest)
          or "basis": "computational" with "labels": [str, ...],
          "device": str, "memory": str, "coherence": "coherent" | "announced", "time_tag": str},
         {"kind": "send", "register": str, "from": str, "to": str, "time_tag": str}],
       "halting": {"all_of": {agent: label, ...}} (optional)}
    """
    from .hilbert import measurement_from_vectors

    try:
        layout = RegisterLayout(tuple((r[0], int(r[1])) for r in doc["layout"]))
        steps: list[Step] = []
        for raw in doc["steps"]:
            kind = raw["kind"]
            tag = raw.get("time_tag", "")
            if kind == "prepare":
                steps.append(Prepare(raw["register"], tuple(_vec(raw["amplitudes"])), tag))
            elif kind == "unitary":
                targets = tuple(raw["targets"])
                mat = np.array([_vec(row) for row in raw["matrix"]])
                sub = RegisterLayout(tuple((n, layout.dim(n)) for n in targets))
                steps.append(ApplyIsometry(Isometry(sub, sub, mat), targets, tag))
            elif kind == "measure_record":
                targets = tuple(raw["targets"])
                if raw.get("basis") == "computational":
                    dim = math.prod(layout.dim(n) for n in targets)
                    labels = raw["labels"]
                    if len(labels) != dim:
                        raise ProtocolError("computational basis needs one label per index")
                    outs = []
                    for k, label in enumerate(labels):
                        mat = np.zeros((dim, dim), dtype=complex)
                        mat[k, k] = 1.0
                        outs.append((label, mat))
                    meas = ProjectiveMeasurement(targets, tuple(outs))
                else:
                    pairs = [(o["label"], _vec(o["vector"])) for o in raw["outcomes"]]
                    meas = measurement_from_vectors(
                        targets, pairs, complement_label=raw.get("complement_label")
                    )
                steps.append(
                    MeasureRecord(
                        raw["agent"], meas, raw["device"], raw["memory"],
                        raw.get("coherence", "coherent"), tag,
                    )
                )
            elif kind == "send":
                steps.append(Send(raw["register"], raw["from"], raw["to"], tag))
            else:
                raise ProtocolError(f"unknown step kind {kind!r}")
        halting = None
        if "halting" in doc and doc["halting"] is not None:
            wanted = dict(doc["halting"]["all_of"])
            halting = lambda outcomes: all(outcomes.get(a) == v for a, v in wanted.items())
        return Protocol(layout, tuple(steps), halting, name=str(doc.get("name", "custom")))
    except (KeyError, TypeError, IndexError) as exc:
        raise ProtocolError(f"malformed protocol document: {exc}") from exc


def load_protocol(path: str) -> Protocol:
    with open(path, "r", encoding="utf-8") as fh:
        return protocol_from_json(json.load(fh))
