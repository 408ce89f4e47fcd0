"""End-to-end orchestration over month cohorts and repeated trials.

Artifacts land under ``{out}/{YYYY-MM}/{trial:02d}/{stage}/``. Every stage
reads only what earlier stages wrote, so each can be re-run on its own.
Trial ``t`` uses seed ``base_seed + t`` for both clustering and the gateway.
"""

from __future__ import annotations

import logging
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from . import _io
from .backtest import (
    ENTRY_CUTOFF,
    FINAL_PRICE_CUTOFF,
    plot_data,
    read_trade_rows,
    run_backtest,
    write_trades,
)
from .clustering import (
    DEFAULT_DIM,
    EmbeddingProvider,
    HashingEmbedder,
    HttpEmbedder,
    choose_k,
    cluster,
    embed,
    read_manifests,
    write_manifests,
)
from .evaluation import (
    CONFIDENCE_THRESHOLD,
    TrialStats,
    accuracy_report,
    evaluate_relations,
    read_evaluation,
    trial_stats,
    write_evaluation,
)
from .market_data import (
    CohortSpec,
    DataError,
    LoadReport,
    MarketRecord,
    PriceSeries,
    filter_binary_and_duration,
    format_timestamp,
    load_markets,
    load_price_series,
    slice_by_month,
    summarize,
    write_markets,
)
from .relation_graph import build_graph, find_triangle_violations, to_dot, to_json, triangles
from .transduction import (
    ChatGateway,
    ChatRequest,
    ErrorLog,
    GatewayError,
    HttpChatGateway,
    MarketRelation,
    ScriptedMockGateway,
    SingleMarket,
    TransductionConfig,
    discover_all,
    label_clusters,
    load_template,
)
from .transduction.gateway import DISCOVER_TEMPLATE, LABEL_TEMPLATE

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

STAT_ROWS = (
    ("Mean", "mean"), ("Std.", "std"), ("Min", "min"), ("25%", "q25"),
    ("Median", "median"), ("75%", "q75"), ("Max", "max"),
)


class ConfigError(ValueError):
    pass


@dataclass
class GatewaySettings:
    kind: str = "mock"  # "mock" or "http"
    url: str | None = None
    api_key_env: str | None = None
    mock_script: str | None = None
    mock_fallback: bool = False
    temperature_jitter: float = 0.0


@dataclass
class EmbeddingSettings:
    kind: str = "hashing"  # "hashing" or "http"
    dim: int = DEFAULT_DIM
    url: str | None = None
    model: str | None = None
    api_key_env: str | None = None
    batch_size: int = 64
    max_in_flight: int = 4


@dataclass
class RunConfig:
    markets_path: str
    cohorts: list[CohortSpec]
    prices_path: str | None = None
    prompt_dir: str | None = None
    trials: int = 30
    base_seed: int = 0
    confidence_threshold: float = CONFIDENCE_THRESHOLD
    entry_cutoff: float = ENTRY_CUTOFF
    final_price_cutoff: float = FINAL_PRICE_CUTOFF
    output_dir: str = "out"
    parallel_trials: bool = False
    record_timings: bool = False
    transduction: TransductionConfig = field(default_factory=TransductionConfig)
    gateway: GatewaySettings = field(default_factory=GatewaySettings)
    embedding: EmbeddingSettings = field(default_factory=EmbeddingSettings)

    def validate(self) -> None:
        problems = []
        if self.trials < 1:
            problems.append("trials must be at least 1")
        if not self.cohorts:
            problems.append("at least one cohort is required")
        for name in ("confidence_threshold", "entry_cutoff", "final_price_cutoff"):
            value = getattr(self, name)
            if not 0 < value <= 0.5:
                problems.append(f"{name}={value} must lie in (0, 0.5]")
        if not Path(self.markets_path).is_file():
            problems.append(f"markets file not found: {self.markets_path}")
        if self.prices_path and not Path(self.prices_path).exists():
            problems.append(f"price series not found: {self.prices_path}")
        if self.gateway.kind not in ("mock", "http"):
            problems.append(f"unknown gateway kind {self.gateway.kind!r}")
        if self.gateway.kind == "http" and not self.gateway.url:
            problems.append("http gateway needs a url")
        if self.gateway.mock_script and not Path(self.gateway.mock_script).is_file():
            problems.append(f"mock script not found: {self.gateway.mock_script}")
        if self.embedding.kind not in ("hashing", "http"):
            problems.append(f"unknown embedding kind {self.embedding.kind!r}")
        if self.embedding.kind == "http" and not (self.embedding.url and self.embedding.model):
            problems.append("http embedding needs url and model")
        if problems:
            raise ConfigError("; ".join(problems))

    def snapshot(self) -> dict:
        d = asdict(self)
        d["cohorts"] = [c.key for c in self.cohorts]
        return d

    def trial_seed(self, trial: int) -> int:
        return self.base_seed + trial

    @classmethod
    def from_toml(cls, path: str | Path) -> "RunConfig":
        """Read a TOML config; relative input paths resolve against its folder."""
        path = Path(path)
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
        base = path.parent

        def resolve(p: str | None) -> str | None:
            return None if p is None else str(base / p) if not Path(p).is_absolute() else p

        inputs = doc.get("inputs", {})
        run = dict(doc.get("run", {}))
        gateway = dict(doc.get("gateway", {}))
        tcfg = {k: gateway.pop(k) for k in ("model_name", "temperature", "max_retries", "concurrency_cap") if k in gateway}
        if "mock_script" in gateway:
            gateway["mock_script"] = resolve(gateway["mock_script"])
        try:
            return cls(
                markets_path=resolve(inputs["markets"]),
                prices_path=resolve(inputs.get("prices")),
                prompt_dir=resolve(inputs.get("prompts")),
                cohorts=[CohortSpec.parse(c) for c in run.pop("cohorts", [])],
                transduction=TransductionConfig(**tcfg),
                gateway=GatewaySettings(**gateway),
                embedding=EmbeddingSettings(**doc.get("embedding", {})),
                **run,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad config {path}: {exc}") from exc

    def with_overrides(
        self,
        months: Sequence[str] | None = None,
        trials: int | None = None,
        seed: int | None = None,
        mock_gateway: str | None = None,
        out: str | None = None,
    ) -> "RunConfig":
        cfg = replace(self)
        if months:
            cfg.cohorts = [CohortSpec.parse(m) for m in months]
        if trials is not None:
            cfg.trials = trials
        if seed is not None:
            cfg.base_seed = seed
        if mock_gateway is not None:
            cfg.gateway = replace(self.gateway, kind="mock", mock_script=mock_gateway)
        if out is not None:
            cfg.output_dir = out
        return cfg


class FallbackGateway:
    """Try ``primary``; on a gateway failure answer from ``fallback``."""

    def __init__(self, primary: ChatGateway, fallback: ChatGateway):
        self.primary = primary
        self.fallback = fallback

    def complete(self, request: ChatRequest) -> str:
        try:
            return self.primary.complete(request)
        except GatewayError as exc:
            log.warning("gateway failed, using mock fallback: %s", exc)
            return self.fallback.complete(request)


def build_gateway(settings: GatewaySettings) -> ChatGateway:
    mock = (
        ScriptedMockGateway.from_file(settings.mock_script)
        if settings.mock_script
        else ScriptedMockGateway()
    )
    if settings.kind == "mock":
        return mock
    http = HttpChatGateway(settings.url, settings.api_key_env)
    return FallbackGateway(http, mock) if settings.mock_fallback else http


def build_embedder(settings: EmbeddingSettings) -> EmbeddingProvider:
    if settings.kind == "http":
        return HttpEmbedder(
            settings.url, settings.model, settings.api_key_env, settings.batch_size, settings.max_in_flight
        )
    return HashingEmbedder(settings.dim)


# --------------------------------------------------------------------------- #
# layout


@dataclass(frozen=True)
class Layout:
    root: Path

    def cohort(self, cohort: CohortSpec) -> Path:
        return self.root / cohort.key

    def trial(self, cohort: CohortSpec, trial: int) -> Path:
        return self.cohort(cohort) / f"{trial:02d}"

    def markets(self, cohort: CohortSpec) -> Path:
        return self.cohort(cohort) / "ingest" / "markets.csv"


def _markets_by_question(path: Path) -> dict[str, MarketRecord]:
    if not path.is_file():
        raise DataError(f"{path} not found; run the ingest stage first")
    return {m.question: m for m in load_markets(path)}


# --------------------------------------------------------------------------- #
# stages


def stage_ingest(
    config: RunConfig, cohort: CohortSpec, markets: Sequence[MarketRecord] | None = None,
    report: LoadReport | None = None,
) -> list[MarketRecord]:
    """Filter and slice the markets file into one cohort's ``ingest/`` folder."""
    layout = Layout(Path(config.output_dir))
    if markets is None:
        report = LoadReport()
        markets = load_markets(config.markets_path, report)
    selected = slice_by_month(filter_binary_and_duration(markets), cohort)
    out = layout.markets(cohort)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_markets(selected, out)
    if report is not None:
        (out.parent / "load_report.json").write_text(report.to_json(), encoding="utf-8")
    stats = summarize(selected)
    _io.write_json(
        {
            "count": stats.count,
            "volume_mean": None if stats.volume_mean is None else str(stats.volume_mean),
            "volume_std": None if stats.volume_std is None else str(stats.volume_std),
            "duration_mean_days": stats.duration_mean_days,
            "duration_std_days": stats.duration_std_days,
        },
        out.parent / "summary.json",
    )
    return selected


def stage_cluster(
    config: RunConfig, cohort: CohortSpec, trial: int, embedder: EmbeddingProvider | None = None
) -> list:
    layout = Layout(Path(config.output_dir))
    markets = list(_markets_by_question(layout.markets(cohort)))
    directory = layout.trial(cohort, trial) / "clusters"
    directory.mkdir(parents=True, exist_ok=True)
    for stale in directory.glob("cluster_*.csv"):
        stale.unlink()
    if not markets:
        return []
    vectors = embed(markets, embedder or build_embedder(config.embedding))
    manifests = cluster(markets, vectors, choose_k(len(markets)), config.trial_seed(trial))
    write_manifests(manifests, directory)
    return manifests


def _trial_transduction(config: RunConfig, trial: int) -> TransductionConfig:
    jitter = config.gateway.temperature_jitter
    if not jitter:
        return config.transduction
    u = float(np.random.default_rng(config.trial_seed(trial)).uniform(-1.0, 1.0))
    return replace(config.transduction, temperature=max(0.0, config.transduction.temperature + jitter * u))


def stage_discover(
    config: RunConfig, cohort: CohortSpec, trial: int, gateway: ChatGateway | None = None
) -> ErrorLog:
    """Label each cluster and collect its validated relations."""
    layout = Layout(Path(config.output_dir))
    tdir = layout.trial(cohort, trial)
    markets = _markets_by_question(layout.markets(cohort))
    manifests = read_manifests(tdir / "clusters")
    gateway = gateway or build_gateway(config.gateway)
    tcfg = _trial_transduction(config, trial)
    seed = config.trial_seed(trial)
    errors = ErrorLog()
    templates = {
        t: load_template(t, config.prompt_dir) if config.prompt_dir else None
        for t in (LABEL_TEMPLATE, DISCOVER_TEMPLATE)
    }
    labels = label_clusters(manifests, gateway, tcfg, seed, errors, templates[LABEL_TEMPLATE])
    singles = {
        q: SingleMarket(
            question=q,
            market_start_time=format_timestamp(m.market_start_time),
            market_end_time=format_timestamp(m.market_end_time),
        )
        for q, m in markets.items()
    }
    relations = discover_all(manifests, singles, gateway, tcfg, seed, errors, templates[DISCOVER_TEMPLATE])

    _io.write_json(
        [
            {"cluster_id": m.cluster_id, "category": labels[m.cluster_id].category, "markets": list(m.questions)}
            for m in manifests
        ],
        tdir / "labels" / "labels.json",
    )
    _io.write_json(
        [
            {"cluster_id": cid, **rel.model_dump()}
            for cid, rl in sorted(relations.items())
            for rel in rl.relations
        ],
        tdir / "discover" / "relations.json",
    )
    _io.write_json(errors.sorted_records(), tdir / "discover" / "errors.json")
    return errors


def _read_labels(tdir: Path) -> list[dict]:
    return _io.read_json(tdir / "labels" / "labels.json")


def stage_evaluate(config: RunConfig, cohort: CohortSpec, trial: int) -> dict:
    """Score relations, write the accuracy report and per-cluster graphs."""
    layout = Layout(Path(config.output_dir))
    tdir = layout.trial(cohort, trial)
    markets = _markets_by_question(layout.markets(cohort))
    labels = {entry["cluster_id"]: entry["category"] for entry in _read_labels(tdir)}
    by_cluster: dict[int, list[MarketRelation]] = {cid: [] for cid in labels}
    for row in _io.read_json(tdir / "discover" / "relations.json"):
        cid = row.pop("cluster_id")
        by_cluster.setdefault(cid, []).append(MarketRelation(**row))
    evaluated = evaluate_relations(by_cluster, markets, labels, config.confidence_threshold)

    (tdir / "evaluate").mkdir(parents=True, exist_ok=True)
    write_evaluation(evaluated, tdir / "evaluate" / "evaluation.csv")
    report = accuracy_report(evaluated)
    _io.write_json(report.to_dict(), tdir / "evaluate" / "accuracy_report.json")

    gdir = tdir / "graph"
    gdir.mkdir(parents=True, exist_ok=True)
    for stale in gdir.glob("graph_*"):
        stale.unlink()
    graph_summary = []
    for cid in sorted(by_cluster):
        graph = build_graph([e for e in evaluated if e.cluster_id == cid], markets)
        if not graph.edges:
            continue
        (gdir / f"graph_{cid}.dot").write_text(to_dot(graph, f"cluster_{cid}"), encoding="utf-8")
        (gdir / f"graph_{cid}.json").write_text(to_json(graph), encoding="utf-8")
        violations = find_triangle_violations(graph)
        graph_summary.append(
            {
                "cluster_id": cid,
                "edges": len(graph.edges),
                "triangles": len(triangles(graph)),
                "violations": len(violations),
                "conflicts": graph.conflicts,
            }
        )
    _io.write_json(graph_summary, gdir / "summary.json")
    return report.to_dict()


def stage_backtest(
    config: RunConfig,
    cohort: CohortSpec,
    trial: int,
    prices: Mapping[str, PriceSeries] | None = None,
) -> dict:
    layout = Layout(Path(config.output_dir))
    tdir = layout.trial(cohort, trial)
    markets = _markets_by_question(layout.markets(cohort))
    if prices is None:
        prices = load_price_series(config.prices_path) if config.prices_path else {}
    evaluated = read_evaluation(tdir / "evaluate" / "evaluation.csv")
    report = run_backtest(evaluated, markets, prices, config.entry_cutoff, config.final_price_cutoff)

    bdir = tdir / "backtest"
    (bdir / "plots").mkdir(parents=True, exist_ok=True)
    for stale in (bdir / "plots").glob("pair_*.json"):
        stale.unlink()
    write_trades(report.trades, bdir / "trades.csv")
    _io.write_json(report.to_dict(), bdir / "backtest_report.json")
    executed = [t for t in report.trades if t.executed]
    for k, trade in enumerate(executed):
        _io.write_json(plot_data(trade, markets, prices), bdir / "plots" / f"pair_{k:03d}.json")
    return report.to_dict()


# --------------------------------------------------------------------------- #
# aggregation and reporting


def _stats_or_none(values: Sequence[float]) -> TrialStats | None:
    return trial_stats(values) if values else None


def cohort_aggregate(cohort_dir: str | Path, trials: int) -> dict:
    """Cross-trial statistics for one cohort, recomputed from trial artifacts.

    Accuracy and ROI statistics are over per-trial values in percentage
    points (trials without eligible pairs or trades are left out); delay
    statistics pool every non-tied pair of every trial.
    """
    cohort_dir = Path(cohort_dir)
    cluster_acc, overall_acc, roi, delays = [], [], [], []
    categories: dict[str, dict[str, float]] = {}
    for t in range(trials):
        tdir = cohort_dir / f"{t:02d}"
        acc = _io.read_json(tdir / "evaluate" / "accuracy_report.json")
        if acc["cluster_accuracy"] is not None:
            cluster_acc.append(100.0 * acc["cluster_accuracy"])
            overall_acc.append(100.0 * acc["overall_accuracy"])
        bt = _io.read_json(tdir / "backtest" / "backtest_report.json")
        if bt["roi"] is not None:
            roi.append(100.0 * bt["roi"])
        delays.extend(
            float(r["resolution_gap_days"])
            for r in read_trade_rows(tdir / "backtest" / "trades.csv")
            if r["skip_reason"] != "LEADER_TIE"
        )
        for entry in _read_labels(tdir):
            c = categories.setdefault(entry["category"], {"markets": 0, "clusters": 0, "pairs": 0, "correct": 0})
            c["markets"] += len(entry["markets"])
            c["clusters"] += 1
        for cat, pc in acc["per_category"].items():
            c = categories.setdefault(cat, {"markets": 0, "clusters": 0, "pairs": 0, "correct": 0})
            c["pairs"] += pc["pair_count"]
            c["correct"] += pc["correct_count"]
    stats = {
        "cluster_accuracy": _stats_or_none(cluster_acc),
        "overall_accuracy": _stats_or_none(overall_acc),
        "roi": _stats_or_none(roi),
        "delay_days": _stats_or_none(sorted(delays)),
    }
    for c in categories.values():
        c["accuracy"] = 100.0 * c["correct"] / c["pairs"] if c["pairs"] else None
    return {
        "trials": trials,
        "values": {
            "cluster_accuracy": cluster_acc,
            "overall_accuracy": overall_acc,
            "roi": roi,
        },
        "stats": {k: (v.to_dict() if v else None) for k, v in stats.items()},
        "categories": dict(sorted(categories.items())),
    }


@dataclass
class RunManifest:
    config: dict
    cohorts: list[str]
    trials: int
    seeds: dict[str, int]
    artifacts: list[str] = field(default_factory=list)
    errors: dict[str, dict[str, dict[str, int]]] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    fatal: bool = False
    root: Path | None = field(default=None, repr=False, compare=False)

    def to_dict(self, include_timings: bool = False) -> dict:
        d = {
            "config": self.config,
            "cohorts": self.cohorts,
            "trials": self.trials,
            "seeds": self.seeds,
            "artifacts": self.artifacts,
            "errors": self.errors,
            "fatal": self.fatal,
        }
        if include_timings:
            d["timings"] = {k: round(v, 6) for k, v in sorted(self.timings.items())}
        return d

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        path = Path(path)
        d = _io.read_json(path)
        return cls(
            config=d["config"], cohorts=d["cohorts"], trials=d["trials"], seeds=d["seeds"],
            artifacts=d.get("artifacts", []), errors=d.get("errors", {}),
            timings=d.get("timings", {}), fatal=d.get("fatal", False), root=path.parent,
        )


def _fmt(value: float | None, digits: int) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def stat_table(title: str, cohorts: list[str], stats: dict[str, dict | None], digits: int) -> list[str]:
    lines = [f"| {title} | " + " | ".join(cohorts) + " |", "|---|" + "---:|" * len(cohorts)]
    degenerate = False
    for label, key in STAT_ROWS:
        cells = []
        for c in cohorts:
            s = stats.get(c)
            if s is None:
                cells.append("n/a")
            elif key == "std" and s["degenerate"]:
                cells.append(_fmt(s[key], digits) + "†")
                degenerate = True
            else:
                cells.append(_fmt(s[key], digits))
        lines.append(f"| {label} | " + " | ".join(cells) + " |")
    if degenerate:
        lines.append("")
        lines.append("† single observation (n=1): standard deviation is degenerate.")
    return lines


def _usd(value: str | None) -> str:
    if value is None:
        return "n/a"
    v = float(value)
    for div, suffix in ((1e9, "B"), (1e6, "M"), (1e3, "k")):
        if abs(v) >= div:
            return f"{v / div:.2f} {suffix}" if suffix != "k" else f"{v / div:.0f} k"
    return f"{v:.0f}"


def report_tables(manifest: RunManifest) -> str:
    """Markdown tables in the Mean/Std./Min/25%/Median/75%/Max layout.

    One table per metric (cluster accuracy, overall accuracy, ROI, delay
    days) with a column per cohort, plus the per-cohort sample summary and
    per-category counts and accuracy.
    """
    root = manifest.root or Path(manifest.config["output_dir"])
    aggregates = {c: cohort_aggregate(root / c, manifest.trials) for c in manifest.cohorts}
    cohorts = manifest.cohorts
    out = ["# Run report", "", f"Trials per cohort: {manifest.trials}", ""]

    out += ["## Sample", "", "| Sample | Count | Volume mean (USD) | Volume std. | Duration mean (days) | Duration std. |",
            "|---|---:|---:|---:|---:|---:|"]
    for c in cohorts:
        s = _io.read_json(root / c / "ingest" / "summary.json")
        out.append(
            f"| {c} | {s['count']} | {_usd(s['volume_mean'])} | {_usd(s['volume_std'])} | "
            f"{_fmt(s['duration_mean_days'], 1)} | {_fmt(s['duration_std_days'], 1)} |"
        )
    out.append("")

    for key, title, digits in (
        ("cluster_accuracy", "Cluster Accuracy (%)", 1),
        ("overall_accuracy", "Overall Accuracy (%)", 1),
        ("roi", "Returns (%)", 1),
        ("delay_days", "Delay (days)", 2),
    ):
        out += [f"## {title}", ""]
        out += stat_table(title, cohorts, {c: aggregates[c]["stats"][key] for c in cohorts}, digits)
        out.append("")

    out += ["## Categories", "", "| Cohort | Category | Markets | Clusters | Eligible pairs | Accuracy (%) |",
            "|---|---|---:|---:|---:|---:|"]
    for c in cohorts:
        for cat, v in aggregates[c]["categories"].items():
            out.append(
                f"| {c} | {cat} | {v['markets']} | {v['clusters']} | {v['pairs']} | {_fmt(v['accuracy'], 1)} |"
            )
    return "\n".join(out) + "\n"


def _listing(root: Path) -> list[str]:
    return sorted(p.relative_to(root).as_posix() for p in root.rglob("*") if p.is_file())


_timing_lock = threading.Lock()


@contextmanager
def _timed(timings: dict[str, float], stage: str) -> Iterator[None]:
    start = time.perf_counter()
    try:
        yield
    finally:
        elapsed = time.perf_counter() - start
        with _timing_lock:
            timings[stage] = timings.get(stage, 0.0) + elapsed


def run(
    config: RunConfig,
    gateway: ChatGateway | None = None,
    embedder: EmbeddingProvider | None = None,
) -> RunManifest:
    """Run every stage for every cohort and trial, then aggregate and report.

    Raises :class:`ConfigError` or :class:`DataError` before producing
    anything if the config or inputs are unusable.
    """
    config.validate()
    load_report = LoadReport()
    markets = load_markets(config.markets_path, load_report)
    prices = load_price_series(config.prices_path) if config.prices_path else {}
    gateway = gateway or build_gateway(config.gateway)
    embedder = embedder or build_embedder(config.embedding)

    root = Path(config.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        config=config.snapshot(),
        cohorts=[c.key for c in config.cohorts],
        trials=config.trials,
        seeds={f"{t:02d}": config.trial_seed(t) for t in range(config.trials)},
        root=root,
    )
    timings: dict[str, float] = {}

    def one_trial(cohort: CohortSpec, t: int) -> dict[str, int]:
        with _timed(timings, "cluster"):
            stage_cluster(config, cohort, t, embedder)
        with _timed(timings, "discover"):
            errors = stage_discover(config, cohort, t, gateway)
        with _timed(timings, "evaluate"):
            stage_evaluate(config, cohort, t)
        with _timed(timings, "backtest"):
            stage_backtest(config, cohort, t, prices)
        counts: dict[str, int] = {}
        for rec in errors.records:
            counts[rec["kind"]] = counts.get(rec["kind"], 0) + rec["count"]
        return dict(sorted(counts.items()))

    for cohort in config.cohorts:
        with _timed(timings, "ingest"):
            stage_ingest(config, cohort, markets, load_report)
        if config.parallel_trials:
            with ThreadPoolExecutor() as pool:
                counts = list(pool.map(lambda t: one_trial(cohort, t), range(config.trials)))
        else:
            counts = [one_trial(cohort, t) for t in range(config.trials)]
        manifest.errors[cohort.key] = {f"{t:02d}": c for t, c in enumerate(counts)}
        with _timed(timings, "aggregate"):
            _io.write_json(cohort_aggregate(Layout(root).cohort(cohort), config.trials),
                           Layout(root).cohort(cohort) / "trial_stats.json")

    with _timed(timings, "report"):
        (root / "report.md").write_text(report_tables(manifest), encoding="utf-8")
    manifest.timings = timings
    manifest.artifacts = [p for p in _listing(root) if p != "run_manifest.json"]
    _io.write_json(manifest.to_dict(config.record_timings), root / "run_manifest.json")
    return manifest
