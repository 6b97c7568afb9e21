"""Ranking and text metrics plus the leave-one-out evaluation harness."""
from .harness import EvalConfig, EvalContext, EvalReport, evaluate, format_table, run_ablation
from .metrics import bleu2, hit_at, lcs_length, ndcg_at, rank_of, rouge_l, rouge_n

__all__ = [
    "EvalConfig",
    "EvalContext",
    "EvalReport",
    "bleu2",
    "evaluate",
    "format_table",
    "hit_at",
    "lcs_length",
    "ndcg_at",
    "rank_of",
    "rouge_l",
    "rouge_n",
    "run_ablation",
]
