"""Self-paced piano practice platform with passive vibrotactile rehearsal.

Core pieces: SMF parsing and live capture (`midi`), chord tokenization
(`tokens`), alignment scoring (`scoring`), stimulation schedule compilation
(`haptics`), the framed glove-pair simulator (`protocol`, `glove`), session
records and statistics (`store`, `analytics`), study counterbalancing
(`study`), and the HTTP service (`service`).
"""

__version__ = "0.1.0"

from .midi import NoteEvent, NoteMessage, SongScore, capture_events, parse_smf, ticks_to_ms, write_smf
from .scoring import (
    AlignmentResult,
    EvalConfig,
    EvalReport,
    align,
    evaluate_performance,
    evaluate_tokens,
    normalized_score,
    timing_cost,
    total_cost,
)
from .tokens import Performance, Token, extract_chords, make_performance, rebase_times

__all__ = [
    "AlignmentResult",
    "EvalConfig",
    "EvalReport",
    "NoteEvent",
    "NoteMessage",
    "Performance",
    "SongScore",
    "Token",
    "align",
    "capture_events",
    "evaluate_performance",
    "evaluate_tokens",
    "extract_chords",
    "make_performance",
    "normalized_score",
    "parse_smf",
    "rebase_times",
    "ticks_to_ms",
    "timing_cost",
    "total_cost",
    "write_smf",
]
