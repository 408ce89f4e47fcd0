"""Embed a month of markets and group them into topical clusters.

Run: python3 demos/01_cluster_markets.py
"""

from __future__ import annotations

from marketrel.clustering import choose_k, cluster, embed
from marketrel.market_data import CohortSpec, filter_binary_and_duration, slice_by_month, summarize
from marketrel.synthetic import make_cohort

# A synthetic April: 16 topic families, several deadlines each.
cohort = make_cohort("April", 2025, n_markets=80, seed=1)
markets = slice_by_month(filter_binary_and_duration(cohort.markets), CohortSpec.parse("2025-04"))
stats = summarize(markets)
print(f"{stats.count} markets, mean volume ${float(stats.volume_mean):,.0f}, "
      f"mean duration {stats.duration_mean_days:.1f} days")

questions = [m.question for m in markets]
vectors = embed(questions)
k = choose_k(len(questions))
print(f"k = {k}\n")

for manifest in cluster(questions, vectors, k, seed=0):
    print(f"cluster {manifest.cluster_id} ({len(manifest.questions)} markets)")
    for q in manifest.questions[:4]:
        print(f"   {q}")
    if len(manifest.questions) > 4:
        print(f"   ... and {len(manifest.questions) - 4} more")
