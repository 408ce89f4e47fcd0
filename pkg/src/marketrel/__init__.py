"""Semantic relationship discovery and leader-follower backtesting for
resolved binary prediction markets."""

from .backtest import BacktestReport, SkipReason, decide_side, execute_trade, run_backtest, select_leader
from .clustering import ClusterManifest, HashingEmbedder, choose_k, cluster, embed, write_manifests
from .evaluation import AccuracyReport, EvaluatedRelation, accuracy_report, evaluate_relations, trial_stats
from .market_data import (
    CohortSpec,
    MarketRecord,
    Outcome,
    PriceSeries,
    PriceTick,
    filter_binary_and_duration,
    load_markets,
    load_price_series,
    slice_by_month,
    summarize,
)
from .pipeline import RunConfig, RunManifest, report_tables, run
from .relation_graph import SignedGraph, build_graph, export_graph, find_triangle_violations

__version__ = "0.1.0"

__all__ = [
    "BacktestReport",
    "SkipReason",
    "decide_side",
    "execute_trade",
    "run_backtest",
    "select_leader",
    "ClusterManifest",
    "HashingEmbedder",
    "choose_k",
    "cluster",
    "embed",
    "write_manifests",
    "AccuracyReport",
    "EvaluatedRelation",
    "accuracy_report",
    "evaluate_relations",
    "trial_stats",
    "CohortSpec",
    "MarketRecord",
    "Outcome",
    "PriceSeries",
    "PriceTick",
    "filter_binary_and_duration",
    "load_markets",
    "load_price_series",
    "slice_by_month",
    "summarize",
    "RunConfig",
    "RunManifest",
    "report_tables",
    "run",
    "SignedGraph",
    "build_graph",
    "export_graph",
    "find_triangle_violations",
]
