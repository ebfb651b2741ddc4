"""State-vector simulation of sealed-lab (Wigner's friend style) protocols,
with an audit engine for the agents' reasoning chains, a virtual-disclosure
soundness oracle, and unambiguous state discrimination of the lab states."""

from .epistemics import (
    AuditVerdict,
    Event,
    Inference,
    NestedImagination,
    ObservationalRecord,
    Prediction,
    Premise,
    ReasoningChain,
    RecordEntry,
    StepMeasurement,
    audit_chain,
    check_premise_sps,
    event_probability,
    fr_canonical_chains,
    infer_c,
    infer_q,
    record_measurement,
    record_of,
    sps_collapse,
)
from .disclosure import (
    DisclosurePoint,
    SoundnessVerdict,
    announced_soundness,
    decohered_born,
    default_disclosure_point,
    evaluate_conclusion,
    flag_measurement,
    insert_disclosure,
    valid_disclosure_window,
    vdis_oracle,
)
from .errors import (
    BlankRegisterError,
    DisclosureError,
    DiscriminationError,
    ImpossibleEventError,
    IsometryError,
    LayoutError,
    MeasurementError,
    NormalizationError,
    ProtocolError,
    RecordError,
    SolipsimError,
    UnevaluableError,
)
from .hilbert import (
    Isometry,
    ProjectiveMeasurement,
    PureState,
    RegisterLayout,
    basis_state,
    blank_state,
    born,
    complete_unitary,
    computational_measurement,
    condition,
    fidelity,
    measurement_from_vectors,
    product_state,
    reduced_density,
    states_equal,
    trace_distance,
)
from .protocol import (
    ApplyIsometry,
    MeasureRecord,
    Prepare,
    Protocol,
    ProtocolSampler,
    RoundTrace,
    RoundsResult,
    Send,
    apply_step,
    continue_unitary,
    load_protocol,
    memory_measurement,
    protocol_from_json,
    run_rounds,
    run_sampled,
    run_unitary,
    sample_many,
)
from .scenarios import (
    AgentSpec,
    CasinoRule,
    ReferenceState,
    ScenarioBundle,
    SCENARIO_BUILDERS,
    bell_bob_basis,
    build_alice_bob,
    build_casino,
    build_fr,
    build_fr_alt_prep,
    matched_bob_basis,
)
from .usd import (
    DiscriminationInstance,
    Povm,
    UsdPrediction,
    UsdStrategy,
    build_fr_usd_instance,
    conditioned_w_distribution,
    fr_usd_report,
    inconclusive_of,
    optimal_usd,
    usd_predictions,
    usd_strategy,
)

__version__ = "0.1.0"
