"""Group-testing search for the environmental preconditions of a black-box exploit."""

__version__ = "0.1.0"

from .model import (
    CONDITION_GROUPS,
    ConditionCatalog,
    ConditionDescriptor,
    Metrics,
    NecessarySet,
    ObservationLog,
    TestOutcome,
    TestRecord,
    TestSpec,
    recall_precision,
    spec_disabling,
    synthetic_catalog,
    validate_instance,
)
from .oracle import (
    RNG_ALGORITHM,
    GaussianNoiseSpec,
    NoiseProfile,
    OracleStats,
    ProblemInstance,
    RecordingOracle,
    SimulatedOracle,
    block_probability,
    execute_test_simulated,
    make_rng,
    sample_noise_profile,
)
from .splitting import (
    SplitSearchConfig,
    SplitSearchResult,
    binary_split_once,
    find_necessary_conditions,
    generalized_binary_splitting,
    individual_testing,
    repeated_binary_splitting,
    residual_check,
)
from .barinel import (
    Diagnosis,
    DiagnosticReport,
    MleConfig,
    exhaustive_minimal_hitting_sets,
    fit_goodness,
    observation_likelihood,
    rank_diagnoses,
    staccato_candidates,
)
from .adaptive import (
    AdaptiveConfig,
    AdaptiveSearchResult,
    ConditionPosterior,
    epsilon_greedy_select,
    has_converged,
    probability_summation,
    run_adaptive_barinel,
)
from .protocol import (
    ExternalOracleSession,
    LoopbackOracleServer,
    execute_test_external,
    fetch_catalog,
)
from .harness import (
    ExperimentConfig,
    ExperimentRow,
    NoisyTrace,
    derive_seed,
    emit_report,
    load_config,
    make_instance,
    parse_config_text,
    random_truth,
    run_noiseless_benchmark,
    run_noisy_benchmark,
    summarize,
)
from .errors import (
    ConfigError,
    InconsistencyError,
    NumericalError,
    ProtocolError,
    TransportError,
)
