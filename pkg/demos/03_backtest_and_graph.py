"""Score planted predictions, draw the signed graph and backtest the pairs.

``PlantedGateway`` proposes every within-cluster pair and states the true
relation 70% of the time, so accuracy should land near 70%.

Run: python3 demos/03_backtest_and_graph.py
"""

from __future__ import annotations

from marketrel.backtest import run_backtest
from marketrel.clustering import choose_k, cluster, embed
from marketrel.evaluation import accuracy_report, evaluate_relations
from marketrel.market_data import format_timestamp
from marketrel.relation_graph import build_graph, export_graph, find_triangle_violations
from marketrel.synthetic import PlantedGateway, make_cohort
from marketrel.transduction import SingleMarket, TransductionConfig, discover_all, label_clusters

cohort = make_cohort("June", 2025, n_markets=100, seed=4)
records = {m.question: m for m in cohort.markets}
questions = sorted(records)
manifests = cluster(questions, embed(questions), choose_k(len(questions)), seed=0)

gw = PlantedGateway({q: m.outcome for q, m in records.items()}, accuracy=0.7, categories=cohort.categories)
config = TransductionConfig()
labels = {cid: lc.category for cid, lc in label_clusters(manifests, gw, config).items()}
singles = {q: SingleMarket(question=q, market_start_time=format_timestamp(m.market_start_time),
                           market_end_time=format_timestamp(m.market_end_time)) for q, m in records.items()}
relations = {cid: rl.relations for cid, rl in discover_all(manifests, singles, gw, config).items()}

evaluated = evaluate_relations(relations, records, labels)
acc = accuracy_report(evaluated)
print(f"eligible pairs {acc.eligible_pair_count}: cluster accuracy {100 * acc.cluster_accuracy:.1f}%, "
      f"overall {100 * acc.overall_accuracy:.1f}%")

first = min(relations)
graph = build_graph([e for e in evaluated if e.cluster_id == first], records)
print(f"\ncluster {first} graph: {len(graph.nodes)} nodes, {len(graph.edges)} edges, "
      f"{len(find_triangle_violations(graph))} inconsistent triangles")
print(export_graph(graph, "dot")[:600], "...")

report = run_backtest(evaluated, records, cohort.prices)
print(f"\n{report.trade_count} trades, {report.skipped_count} skipped {report.skip_counts}")
print(f"invested {report.total_invested:.2f}, gain {report.total_gain:.2f}, ROI {100 * report.roi:.1f}%")
print(f"median leader-to-follower delay {report.delay_stats.median:.2f} days")
