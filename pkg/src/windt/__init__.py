"""Model-agnostic transducer decoding engine.

Greedy (frame-by-frame and windowed), batched label-looping greedy, and
windowed beam search over an abstract decoder/joiner interface, with
deterministic synthetic models, exhaustive-lattice references, and a cost
model that counts synchronization rounds instead of wall-clock time.
"""

from .core import (
    BatchMismatch,
    CostReport,
    DecodeError,
    DecoderStateHandle,
    EncoderOutput,
    FeasibilityExceeded,
    Hypothesis,
    IncompleteTable,
    InvalidLogits,
    ReportMismatch,
    TransducerModel,
    Vocabulary,
    WindowLogits,
    argmax_with_tiebreak,
    log_normalize,
    logsumexp,
)
from .synthmodel import (
    SeededSyntheticModel,
    SyntheticUtterance,
    TableModel,
    build_seeded_model,
    build_table_model,
    generate_corpus,
    load_model,
    save_model,
)
from .greedy import GreedyConfig, GreedyResult, decode_sequential, decode_wind, record_jump_histogram
from .batched import batch_cost_report, decode_batch
from .beam import (
    BeamConfig,
    BeamResult,
    FirstEmissionDistribution,
    decode_graves_beam,
    decode_wind_beam,
    first_emission_logprobs,
    recombine_prune_prefix_search,
)
from .oracle import LatticeEnumeration, enumerate_lattice, exact_kbest, replay_sequential
from .metrics import TradeoffRow, WerReport, aggregate_costs, build_tradeoff_table, token_error_rate

__version__ = "0.1.0"

__all__ = [
    "BatchMismatch", "BeamConfig", "BeamResult", "CostReport", "DecodeError",
    "DecoderStateHandle", "EncoderOutput", "FeasibilityExceeded",
    "FirstEmissionDistribution", "GreedyConfig", "GreedyResult", "Hypothesis",
    "IncompleteTable", "InvalidLogits", "LatticeEnumeration", "ReportMismatch",
    "SeededSyntheticModel", "SyntheticUtterance", "TableModel", "TradeoffRow",
    "TransducerModel", "Vocabulary", "WerReport", "WindowLogits",
    "aggregate_costs", "argmax_with_tiebreak", "batch_cost_report",
    "build_seeded_model", "build_table_model", "build_tradeoff_table",
    "decode_batch", "decode_graves_beam", "decode_sequential", "decode_wind",
    "decode_wind_beam", "enumerate_lattice", "exact_kbest",
    "first_emission_logprobs", "generate_corpus", "load_model", "log_normalize",
    "logsumexp", "record_jump_histogram", "recombine_prune_prefix_search",
    "replay_sequential", "save_model", "token_error_rate",
]
