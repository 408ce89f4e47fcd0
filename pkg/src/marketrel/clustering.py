"""Question embedding and spherical k-means partitioning of market cohorts."""

from __future__ import annotations

import csv
import hashlib
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import httpx
import numpy as np

DEFAULT_DIM = 512
MAX_ITER = 100
SHIFT_TOL = 1e-6

_TOKEN = re.compile(r"[a-z0-9]+")


class EmbeddingError(RuntimeError):
    """A provider failed on one batch; ``batch`` holds the texts to retry."""

    def __init__(self, message: str, batch: Sequence[str]):
        super().__init__(message)
        self.batch = list(batch)


class EmbeddingProvider(Protocol):
    def embed_batch(self, texts: Sequence[str]) -> np.ndarray: ...


class HashingEmbedder:
    """Hashed term-frequency vectors with unit L2 norm.

    Tokens are lowercase alphanumeric runs; each is hashed with BLAKE2b so
    output is identical across processes and platforms.
    """

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little") % self.dim

    def embed_one(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        tokens = _TOKEN.findall(text.lower()) or [text.strip()]
        for tok in tokens:
            vec[self._bucket(tok)] += 1.0
        return vec / np.linalg.norm(vec)

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        return np.vstack([self.embed_one(t) for t in texts]) if texts else np.zeros((0, self.dim))


class HttpEmbedder:
    """Client for a JSON embedding endpoint.

    Request body is ``{"model": ..., "inputs": [...]}`` and the response must
    carry ``{"vectors": [[...], ...]}`` in input order.
    """

    def __init__(
        self,
        url: str,
        model: str,
        api_key_env: str | None = None,
        batch_size: int = 64,
        max_in_flight: int = 4,
        timeout: float = 30.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.url = url
        self.model = model
        self.api_key_env = api_key_env
        self.batch_size = batch_size
        self.max_in_flight = max_in_flight
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def _headers(self) -> dict[str, str]:
        if self.api_key_env and os.environ.get(self.api_key_env):
            return {"Authorization": f"Bearer {os.environ[self.api_key_env]}"}
        return {}

    def _post(self, batch: Sequence[str]) -> np.ndarray:
        try:
            resp = self._client.post(
                self.url, json={"model": self.model, "inputs": list(batch)}, headers=self._headers()
            )
            resp.raise_for_status()
            vectors = np.asarray(resp.json()["vectors"], dtype=float)
        except (httpx.HTTPError, KeyError, ValueError, TypeError) as exc:
            raise EmbeddingError(f"embedding request failed: {exc}", batch) from exc
        if vectors.ndim != 2 or len(vectors) != len(batch):
            raise EmbeddingError("embedding response has wrong shape", batch)
        return vectors

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        batches = [texts[i : i + self.batch_size] for i in range(0, len(texts), self.batch_size)]
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            parts = list(pool.map(self._post, batches))
        return np.vstack(parts)


def embed(questions: Sequence[str], provider: EmbeddingProvider | None = None) -> np.ndarray:
    """Embed questions into an ``(n, dim)`` array, row order preserved."""
    if not questions:
        raise ValueError("no questions to embed")
    provider = provider or HashingEmbedder()
    vectors = np.asarray(provider.embed_batch(list(questions)), dtype=float)
    if vectors.shape[0] != len(questions) or vectors.ndim != 2 or vectors.shape[1] == 0:
        raise EmbeddingError("provider returned a malformed embedding matrix", questions)
    if not np.all(np.isfinite(vectors)):
        raise EmbeddingError("provider returned non-finite values", questions)
    return vectors


def choose_k(n: int) -> int:
    """Number of clusters for a batch of ``n`` markets: max(1, floor(n / 10))."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return max(1, n // 10)


@dataclass(frozen=True)
class ClusterManifest:
    cluster_id: int
    questions: tuple[str, ...]


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)


def spherical_kmeans(x: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Cosine k-means; returns one label per row of ``x``.

    Initialisation picks a seeded random first centre and then repeatedly
    the point farthest (in cosine distance) from all chosen centres.
    Ties resolve to the lowest index throughout.
    """
    n = len(x)
    x = _unit_rows(x)
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    nearest = 1.0 - x @ x[chosen[0]]
    for _ in range(1, k):
        idx = int(np.argmax(nearest))
        chosen.append(idx)
        nearest = np.minimum(nearest, 1.0 - x @ x[idx])
    centres = x[chosen].copy()

    for _ in range(MAX_ITER):
        labels = np.argmax(x @ centres.T, axis=1)
        updated = centres.copy()
        for j in range(k):
            members = x[labels == j]
            if len(members):
                mean = members.sum(axis=0)
                norm = np.linalg.norm(mean)
                if norm > 0:
                    updated[j] = mean / norm
        shift = float(np.max(np.linalg.norm(updated - centres, axis=1)))
        centres = updated
        if shift < SHIFT_TOL:
            break
    return np.argmax(x @ centres.T, axis=1)


def cluster(
    questions: Sequence[str], vectors: np.ndarray, k: int, seed: int
) -> list[ClusterManifest]:
    """Partition ``questions`` into at most ``k`` non-empty manifests.

    Input is put in sorted-question order before clustering, so the
    partition does not depend on how the caller ordered it. Manifest ids
    are dense, ordered by each cluster's alphabetically first member.
    """
    n = len(questions)
    if len(vectors) != n:
        raise ValueError("one vector per question required")
    if len(set(questions)) != n:
        raise ValueError("questions must be unique")
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be between 1 and the number of vectors ({n})")
    order = sorted(range(n), key=lambda i: questions[i])
    labels = spherical_kmeans(np.asarray(vectors, dtype=float)[order], k, seed)
    groups: dict[int, list[str]] = {}
    for pos, label in zip(order, labels):
        groups.setdefault(int(label), []).append(questions[pos])
    members = sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])
    return [ClusterManifest(i, tuple(g)) for i, g in enumerate(members)]


def manifest_path(directory: str | Path, cluster_id: int) -> Path:
    return Path(directory) / f"cluster_{cluster_id}.csv"


def write_manifests(manifests: Sequence[ClusterManifest], directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for m in manifests:
        path = manifest_path(directory, m.cluster_id)
        try:
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["question"])
                writer.writerows([q] for q in m.questions)
        except OSError as exc:
            raise OSError(f"could not write manifest {path}: {exc}") from exc
        paths.append(path)
    return paths


def read_manifest(path: str | Path) -> ClusterManifest:
    path = Path(path)
    m = re.fullmatch(r"cluster_(\d+)\.csv", path.name)
    if not m:
        raise ValueError(f"not a manifest file name: {path.name}")
    with open(path, newline="", encoding="utf-8") as fh:
        questions = tuple(row["question"] for row in csv.DictReader(fh))
    return ClusterManifest(int(m.group(1)), questions)


def read_manifests(directory: str | Path) -> list[ClusterManifest]:
    manifests = [read_manifest(p) for p in Path(directory).glob("cluster_*.csv")]
    return sorted(manifests, key=lambda m: m.cluster_id)
