"""Label a cluster and discover related pairs through a scripted offline model.

The scripted gateway answers by request fingerprint, so this runs without
network access. The second cluster shows the retry loop: the first answer
has an out-of-range confidence, the retry is accepted.

Run: python3 demos/02_discover_relations.py
"""

from __future__ import annotations

import json

from marketrel.clustering import ClusterManifest
from marketrel.transduction import (
    DISCOVER_TEMPLATE,
    LABEL_TEMPLATE,
    ErrorLog,
    ScriptedMockGateway,
    SingleMarket,
    TransductionConfig,
    discover_relations,
    label_cluster,
)

tariffs = ClusterManifest(0, (
    "Will Trump increase tariffs on Canada before May?",
    "Will Trump increase tariffs on Mexico before May?",
    "Will the US lower tariffs on China before May?",
))
rates = ClusterManifest(1, ("Will the Fed cut interest rates in April?", "Will the Fed hold interest rates steady in April?"))

gw = ScriptedMockGateway()
gw.add(LABEL_TEMPLATE, tariffs.questions, {"category": "politics"})
gw.add(LABEL_TEMPLATE, rates.questions, {"category": "macro"})  # off-taxonomy, ends as "other"
gw.add(DISCOVER_TEMPLATE, tariffs.questions, {"relations": [
    {"question_i": tariffs.questions[1], "question_j": tariffs.questions[0], "is_same_outcome": True,
     "confidence_score": 0.85, "rationale": "Both follow the same tariff policy push."},
    {"question_i": tariffs.questions[0], "question_j": tariffs.questions[2], "is_same_outcome": False,
     "confidence_score": 0.6, "rationale": "Escalation with neighbours makes easing elsewhere less likely."},
]})
gw.add(DISCOVER_TEMPLATE, rates.questions, [
    {"relations": [{"question_i": rates.questions[0], "question_j": rates.questions[1], "is_same_outcome": False,
                    "confidence_score": 1.3, "rationale": "Mutually exclusive decisions."}]},
    {"relations": [{"question_i": rates.questions[0], "question_j": rates.questions[1], "is_same_outcome": False,
                    "confidence_score": 0.95, "rationale": "Mutually exclusive decisions."}]},
])

config = TransductionConfig(max_retries=2)
errors = ErrorLog()
for manifest in (tariffs, rates):
    markets = [SingleMarket(question=q, market_start_time="2025-03-01T00:00:00Z",
                            market_end_time="2025-05-01T00:00:00Z") for q in manifest.questions]
    label = label_cluster(manifest, gw, config, errors=errors)
    found = discover_relations(manifest, markets, gw, config, errors=errors)
    print(f"cluster {manifest.cluster_id}: {label.category}")
    for r in found.relations:
        kind = "same" if r.is_same_outcome else "different"
        print(f"   {kind:9s} {r.confidence_score:.2f}  {r.question_i}  <->  {r.question_j}")

print(f"\n{len(gw.calls)} model calls")
print("errors:", json.dumps(errors.sorted_records(), indent=1))
