"""Lookahead (A*-like) decoding for autoregressive sequence models, with
CNF lexical constraints and exhaustive-search reference checks."""

from .constraints import (
    Clause,
    ClauseStatus,
    ConstraintSet,
    ConstraintState,
    Literal,
    advance,
    init_state,
    load_constraints,
    prefix_progress,
    unsatisfied_targets,
)
from .heuristics import (
    HeuristicWeights,
    combined_candidate_score,
    future_satisfaction_h,
    phrase_prob_from,
    unconstrained_h,
)
from .lookahead import (
    Continuation,
    LookaheadConfig,
    beam_lookahead,
    greedy_lookahead,
    sampling_lookahead,
    soft_lookahead,
)
from .models import (
    DecodingError,
    InvalidInputError,
    NGramModel,
    ParseError,
    StepScorer,
    TableModel,
    UnsupportedCapabilityError,
    Vocabulary,
    load_model,
    load_ngram,
    load_table_model,
    save_ngram,
    sequence_logprob,
    soft_step,
    step,
    train_ngram,
)
from .metrics import coverage, satisfaction_report, term_use_rate
from .oracle import BudgetExceededError, OracleBudget, exact_argmax, exact_Q
from .search import (
    DecodeParams,
    DecodeResult,
    EmptyBeamError,
    decode,
    greedy_decode,
    topk_adjusted_distribution,
    topk_sample_decode,
)

__version__ = "0.1.0"
