from __future__ import annotations

import hashlib
import json
import math
from collections import Counter

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from marketrel.clustering import (
    ClusterManifest,
    EmbeddingError,
    HashingEmbedder,
    HttpEmbedder,
    choose_k,
    cluster,
    embed,
    read_manifests,
    spherical_kmeans,
    write_manifests,
)

TARIFFS = [
    "Will Trump increase tariffs on Canada before May?",
    "Will Trump increase tariffs on Mexico before May?",
    "Will the US lower tariffs on China before May?",
]
OTHER = ["Will Arsenal win the Premier League?", "Will Bitcoin close above 100k in April?"]


def oracle_vector(text: str, dim: int = 512) -> np.ndarray:
    """Hashed term frequency computed from scratch with a Counter."""
    words = "".join(c if c.isascii() and c.isalnum() else " " for c in text.lower()).split()
    counts = Counter(
        int.from_bytes(hashlib.blake2b(w.encode(), digest_size=8).digest(), "little") % dim for w in words
    )
    vec = np.zeros(dim)
    for bucket, c in counts.items():
        vec[bucket] = c
    return vec / math.sqrt(sum(c * c for c in counts.values()))


class TestEmbedding:
    def test_matches_oracle(self):
        for q in TARIFFS + OTHER:
            np.testing.assert_allclose(HashingEmbedder().embed_one(q), oracle_vector(q), atol=1e-12)

    def test_identical_text_identical_vector(self):
        v = embed([TARIFFS[0], "x", TARIFFS[0] + " "])
        np.testing.assert_array_equal(v[0], v[2])

    @given(st.lists(st.text(min_size=1, max_size=30).filter(str.strip), min_size=1, max_size=8))
    def test_unit_norm(self, texts):
        v = embed(texts)
        assert v.shape == (len(texts), 512)
        np.testing.assert_allclose(np.linalg.norm(v, axis=1), 1.0, atol=1e-12)

    def test_related_questions_closer(self):
        v = embed(TARIFFS + OTHER)
        sims = v @ v.T
        assert sims[0, 1] > max(sims[0, 3], sims[0, 4])
        assert sims[0, 1] == pytest.approx(
            float(oracle_vector(TARIFFS[0]) @ oracle_vector(TARIFFS[1])), abs=1e-12
        )

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            embed([])

    def test_malformed_provider_output(self):
        class Bad:
            def embed_batch(self, texts):
                return np.full((len(texts), 3), np.nan)

        with pytest.raises(EmbeddingError):
            embed(["a"], Bad())


class TestHttpEmbedder:
    def test_batches_and_order(self, monkeypatch):
        seen = []

        def handler(request: httpx.Request) -> httpx.Response:
            body = json.loads(request.content)
            seen.append((body["model"], body["inputs"], request.headers.get("authorization")))
            return httpx.Response(200, json={"vectors": [[float(len(t)), 1.0] for t in body["inputs"]]})

        monkeypatch.setenv("EMBED_KEY", "secret")
        emb = HttpEmbedder("http://embed.test/v1", "m1", "EMBED_KEY", batch_size=2,
                           transport=httpx.MockTransport(handler))
        out = embed(["a", "bb", "ccc", "dddd", "e"], emb)
        np.testing.assert_array_equal(out[:, 0], [1, 2, 3, 4, 1])
        assert sorted(len(s[1]) for s in seen) == [1, 2, 2]
        assert all(s[0] == "m1" and s[2] == "Bearer secret" for s in seen)

    def test_failure_names_batch(self):
        transport = httpx.MockTransport(lambda r: httpx.Response(503))
        emb = HttpEmbedder("http://embed.test/v1", "m1", batch_size=10, transport=transport)
        with pytest.raises(EmbeddingError) as info:
            emb.embed_batch(["a", "b"])
        assert info.value.batch == ["a", "b"]


class TestChooseK:
    @pytest.mark.parametrize("n, k", [(1, 1), (9, 1), (10, 1), (19, 1), (20, 2), (217, 21), (1000, 100)])
    def test_examples(self, n, k):
        assert choose_k(n) == k

    @given(st.integers(1, 100_000))
    def test_formula(self, n):
        assert choose_k(n) == max(1, math.floor(n / 10))

    def test_zero(self):
        with pytest.raises(ValueError):
            choose_k(0)


def _check_partition(questions, manifests, k):
    members = [q for m in manifests for q in m.questions]
    assert sorted(members) == sorted(questions)
    assert len(members) == len(set(members))
    assert all(m.questions for m in manifests)
    assert len(manifests) <= k
    assert [m.cluster_id for m in manifests] == list(range(len(manifests)))


class TestCluster:
    def test_identical_questions_single_cluster(self):
        qs = ["same a", "same b", "same c"]
        vecs = np.tile(HashingEmbedder().embed_one("same"), (3, 1))
        [m] = cluster(qs, vecs, 1, seed=0)
        assert m.questions == tuple(sorted(qs))

    def test_planted_clouds_recovered(self):
        rng = np.random.default_rng(7)
        axis_a, axis_b = np.eye(16)[0], np.eye(16)[1]
        vecs = np.vstack([axis_a + 0.05 * rng.standard_normal(16) for _ in range(10)]
                         + [axis_b + 0.05 * rng.standard_normal(16) for _ in range(10)])
        qs = [f"a{i:02d}" for i in range(10)] + [f"b{i:02d}" for i in range(10)]
        for seed in range(5):
            ms = cluster(qs, vecs, 2, seed)
            assert {m.questions for m in ms} == {tuple(qs[:10]), tuple(qs[10:])}

    def test_fixed_point_is_nearest_centroid(self):
        # oracle: at convergence every point sits with its highest-cosine centroid
        rng = np.random.default_rng(3)
        x = rng.standard_normal((60, 8))
        labels = spherical_kmeans(x, 5, seed=1)
        unit = x / np.linalg.norm(x, axis=1, keepdims=True)
        centres = []
        for j in sorted(set(labels.tolist())):
            s = unit[labels == j].sum(axis=0)
            centres.append(s / np.linalg.norm(s))
        best = np.argmax(unit @ np.array(centres).T, axis=1)
        assert np.array_equal(np.array(sorted(set(labels.tolist())))[best], labels)

    def test_217_markets(self):
        qs = [f"Will event {i} happen in April?" for i in range(217)]
        ms = cluster(qs, embed(qs), choose_k(217), seed=0)
        _check_partition(qs, ms, 21)

    def test_k_too_large(self):
        with pytest.raises(ValueError, match="k="):
            cluster(["a", "b"], embed(["a", "b"]), 3, seed=0)

    def test_duplicate_questions_rejected(self):
        with pytest.raises(ValueError):
            cluster(["a", "a"], embed(["a", "a"]), 1, seed=0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 40), st.integers(0, 10_000), st.data())
    def test_partition_property(self, n, seed, data):
        k = data.draw(st.integers(1, n))
        qs = [f"question {i} {seed % 7}" for i in range(n)]
        ms = cluster(qs, np.random.default_rng(seed).standard_normal((n, 6)), k, seed)
        _check_partition(qs, ms, k)

    @settings(max_examples=20, deadline=None)
    @given(st.permutations(list(range(25))))
    def test_input_order_does_not_matter(self, perm):
        qs = [f"Will team {i % 5} beat rival {i} in April?" for i in range(25)]
        vecs = embed(qs)
        base = cluster(qs, vecs, 3, seed=11)
        shuffled = cluster([qs[i] for i in perm], vecs[perm], 3, seed=11)
        assert base == shuffled

    def test_same_seed_same_partition(self):
        qs = TARIFFS + OTHER + [f"Will player {i} score in April?" for i in range(15)]
        v = embed(qs)
        assert cluster(qs, v, 2, seed=5) == cluster(qs, v, 2, seed=5)


class TestManifests:
    def test_round_trip_and_layout(self, tmp_path):
        ms = [ClusterManifest(0, ("a, with comma", 'b "quoted"')), ClusterManifest(1, ("c",))]
        paths = write_manifests(ms, tmp_path)
        assert [p.name for p in paths] == ["cluster_0.csv", "cluster_1.csv"]
        assert (tmp_path / "cluster_1.csv").read_text() == "question\nc\n"
        assert read_manifests(tmp_path) == ms

    def test_byte_identical_rewrites(self, tmp_path):
        qs = TARIFFS + OTHER + [f"Will player {i} score in April?" for i in range(15)]
        for run in ("one", "two"):
            write_manifests(cluster(qs, embed(qs), 2, seed=9), tmp_path / run)
        for p in sorted((tmp_path / "one").iterdir()):
            assert p.read_bytes() == (tmp_path / "two" / p.name).read_bytes()
