"""Cluster labelling and relationship discovery through a chat gateway."""

from __future__ import annotations

import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence, TypeVar

from ..clustering import ClusterManifest
from .gateway import DISCOVER_TEMPLATE, LABEL_TEMPLATE, ChatGateway, ChatRequest, GatewayError
from .schemas import (
    CATEGORIES,
    LabeledCluster,
    MarketRelation,
    MarketRelationList,
    SchemaError,
    SingleMarket,
    TransductionConfig,
    parse_label,
    parse_relation_list,
)

log = logging.getLogger(__name__)

T = TypeVar("T")


def load_template(template_id: str, directory: str | Path | None = None) -> str:
    """Prompt template text, from ``directory`` if given else the bundled copy."""
    if directory is not None:
        return (Path(directory) / f"{template_id}.txt").read_text("utf-8")
    return resources.files(__package__).joinpath(f"prompts/{template_id}.txt").read_text("utf-8")


@dataclass
class ErrorLog:
    """Thread-safe collector of per-cluster transduction problems."""

    records: list[dict] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def add(self, stage: str, cluster_id: int, kind: str, detail: str = "", count: int = 1) -> None:
        with self._lock:
            self.records.append(
                {"stage": stage, "cluster_id": cluster_id, "kind": kind, "detail": detail, "count": count}
            )

    def count(self, kind: str | None = None) -> int:
        with self._lock:
            return sum(r["count"] for r in self.records if kind is None or r["kind"] == kind)

    def sorted_records(self) -> list[dict]:
        with self._lock:
            return sorted(self.records, key=lambda r: (r["cluster_id"], r["stage"], r["kind"], r["detail"]))


_LABEL_FORMAT = (
    "Reply with a single JSON object of the form {\"category\": \"<category>\"} "
    "where <category> is one of: " + ", ".join(CATEGORIES) + "."
)
_DISCOVER_FORMAT = (
    "Reply with a single JSON object matching this JSON schema:\n"
    + json.dumps(MarketRelationList.model_json_schema(), sort_keys=True)
)


def render_label_prompt(questions: Sequence[str], template: str | None = None) -> str:
    listing = "\n".join(f"- {q}" for q in questions)
    return (template or load_template(LABEL_TEMPLATE)).replace("{{questions}}", listing)


def render_discover_prompt(markets: Sequence[SingleMarket], template: str | None = None) -> str:
    listing = "\n".join(
        json.dumps(m.model_dump(exclude_none=True), ensure_ascii=False) for m in markets
    )
    return (template or load_template(DISCOVER_TEMPLATE)).replace("{{questions}}", listing)


def _ask(
    gateway: ChatGateway,
    template_id: str,
    questions: Sequence[str],
    system: str,
    prompt: str,
    config: TransductionConfig,
    seed: int,
    parse: Callable[[str], T],
) -> T:
    """Call the gateway, re-asking with the validation error on failure.

    Raises the last :class:`SchemaError` or :class:`GatewayError` once
    ``config.max_retries`` retries are spent.
    """
    messages = [{"role": "system", "content": system}, {"role": "user", "content": prompt}]
    last: Exception | None = None
    for attempt in range(config.max_retries + 1):
        request = ChatRequest(
            template_id=template_id,
            questions=tuple(questions),
            messages=tuple(messages),
            model=config.model_name,
            temperature=config.temperature,
            seed=seed,
            attempt=attempt,
        )
        raw = gateway.complete(request)
        try:
            return parse(raw)
        except SchemaError as exc:
            last = exc
            log.debug("%s attempt %d rejected: %s", template_id, attempt, exc)
            messages = messages + [
                {"role": "assistant", "content": raw},
                {
                    "role": "user",
                    "content": f"Your answer was rejected: {exc}\nReply again with a single JSON object.",
                },
            ]
    assert last is not None
    raise last


def label_cluster(
    cluster: ClusterManifest,
    gateway: ChatGateway,
    config: TransductionConfig,
    seed: int = 0,
    errors: ErrorLog | None = None,
    template: str | None = None,
) -> LabeledCluster:
    """Give the cluster exactly one taxonomy category.

    Persistent off-taxonomy or unreachable-gateway answers fall back to
    ``other`` and are logged in ``errors``.
    """
    if not cluster.questions:
        raise ValueError(f"cluster {cluster.cluster_id} is empty")
    errors = errors if errors is not None else ErrorLog()
    try:
        category = _ask(
            gateway, LABEL_TEMPLATE, cluster.questions, _LABEL_FORMAT,
            render_label_prompt(cluster.questions, template), config, seed, parse_label,
        )
    except SchemaError as exc:
        errors.add("label", cluster.cluster_id, "off_taxonomy", str(exc))
        category = "other"
    except GatewayError as exc:
        errors.add("label", cluster.cluster_id, "gateway", str(exc))
        category = "other"
    return LabeledCluster(markets=json.dumps(list(cluster.questions), ensure_ascii=False), category=category)


def canonicalize_relations(
    relations: Sequence[MarketRelation], members: Sequence[str]
) -> tuple[list[MarketRelation], int, int]:
    """Keep member-only relations, in canonical orientation, one per pair.

    Returns ``(relations, dropped_non_member, collapsed_duplicates)``.
    Duplicates keep the higher confidence (the earlier one on ties).
    """
    member_set = {q.strip() for q in members}
    kept: dict[tuple[str, str], MarketRelation] = {}
    dropped = collapsed = 0
    for rel in relations:
        if rel.question_i.strip() not in member_set or rel.question_j.strip() not in member_set:
            dropped += 1
            continue
        rel = rel.canonical()
        prior = kept.get(rel.pair)
        if prior is not None:
            collapsed += 1
            if rel.confidence_score <= prior.confidence_score:
                continue
        kept[rel.pair] = rel
    return list(kept.values()), dropped, collapsed


def discover_relations(
    cluster: ClusterManifest,
    markets: Sequence[SingleMarket],
    gateway: ChatGateway,
    config: TransductionConfig,
    seed: int = 0,
    errors: ErrorLog | None = None,
    template: str | None = None,
) -> MarketRelationList:
    """Ask for related pairs within one cluster and validate the answer.

    Relations naming a question that is not copied verbatim from the
    cluster are dropped and counted. Output that never parses, or an
    unreachable gateway, yields an empty list plus an error record.
    """
    members = [q.strip() for q in cluster.questions]
    strays = [m.question for m in markets if m.question.strip() not in members]
    if strays:
        raise ValueError(f"markets not in cluster {cluster.cluster_id}: {strays}")
    errors = errors if errors is not None else ErrorLog()
    try:
        parsed = _ask(
            gateway, DISCOVER_TEMPLATE, cluster.questions, _DISCOVER_FORMAT,
            render_discover_prompt(markets, template), config, seed, parse_relation_list,
        )
    except SchemaError as exc:
        errors.add("discover", cluster.cluster_id, "schema", str(exc))
        return MarketRelationList(relations=[])
    except GatewayError as exc:
        errors.add("discover", cluster.cluster_id, "gateway", str(exc))
        return MarketRelationList(relations=[])
    relations, dropped, collapsed = canonicalize_relations(parsed.relations, members)
    if dropped:
        errors.add("discover", cluster.cluster_id, "verbatim_mismatch", count=dropped)
    if collapsed:
        errors.add("discover", cluster.cluster_id, "duplicate_pair", count=collapsed)
    return MarketRelationList(relations=relations)


def _map_ordered(fn: Callable[[ClusterManifest], T], clusters: Sequence[ClusterManifest], cap: int) -> dict[int, T]:
    ordered = sorted(clusters, key=lambda c: c.cluster_id)
    with ThreadPoolExecutor(max_workers=cap) as pool:
        results = list(pool.map(fn, ordered))
    return {c.cluster_id: r for c, r in zip(ordered, results)}


def label_clusters(
    clusters: Sequence[ClusterManifest],
    gateway: ChatGateway,
    config: TransductionConfig,
    seed: int = 0,
    errors: ErrorLog | None = None,
    template: str | None = None,
) -> dict[int, LabeledCluster]:
    """Label every cluster, at most ``config.concurrency_cap`` requests in flight."""
    errors = errors if errors is not None else ErrorLog()
    return _map_ordered(
        lambda c: label_cluster(c, gateway, config, seed, errors, template), clusters, config.concurrency_cap
    )


def discover_all(
    clusters: Sequence[ClusterManifest],
    markets: dict[str, SingleMarket],
    gateway: ChatGateway,
    config: TransductionConfig,
    seed: int = 0,
    errors: ErrorLog | None = None,
    template: str | None = None,
) -> dict[int, MarketRelationList]:
    errors = errors if errors is not None else ErrorLog()
    return _map_ordered(
        lambda c: discover_relations(
            c, [markets[q] for q in c.questions], gateway, config, seed, errors, template
        ),
        clusters,
        config.concurrency_cap,
    )
