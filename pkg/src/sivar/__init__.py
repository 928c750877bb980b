"""sivar: signal-integrity variability analytics for 4-port PWB S-parameter populations.

Parses Touchstone measurements, reduces each differential net to scalar SI
outcomes (skew, loss, mode conversion, impedance, eye metrics), and runs the
variability statistics (global summaries, pooled same-net variance, n-way
ANOVA, sample-size resampling), validated end to end against a synthetic
board-population generator with known ground truth.
"""

from .dataset import MANIFEST_COLUMNS, NetRecord, OutcomeTable, export, load_manifest, same_net_grouping
from .linksim import (
    DriverWaveform,
    EyeDiagram,
    EyeMetrics,
    extract_metrics,
    impulse_response,
    prbs_bits,
    simulate_link,
    single_bit_response,
    synthesize_eye,
    trapezoid_driver,
)
from .metrics import (
    OutcomeRow,
    flight_time,
    loss_per_inch,
    random_skew,
    scd21_db,
    sdd11_crossing,
    total_skew,
    unwrap_phase,
)
from .pipeline import AnalysisConfig, analyze_nets
from .sparams import (
    MixedModeNetwork,
    NetworkData,
    TouchstoneError,
    TwoPort,
    apply_port_map,
    cascade_diff,
    parse_touchstone,
    read_touchstone,
    to_mixed_mode,
    write_touchstone,
)
from .stats import (
    AnovaResult,
    PredictorSpec,
    StatSummary,
    anova,
    deflate_tester,
    five_sigma_interval,
    gaussian_compliance,
    pooled_snv,
    sample_size_experiment,
    summarize,
)
from .synth import GroundTruth, NetParams, Population, PopulationSpec, generate_population, net_model, write_population
from .tdr import TdrTrace, find_settle_time, step_response, windowed_impedance

__version__ = "0.1.0"
