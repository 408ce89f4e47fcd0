"""Write a synthetic two-month dataset and run the whole pipeline on it.

Equivalent to ``marketrel run-all --config <dir>/config.toml`` with the
configuration written below. Artifacts land in ``<dir>/out``.

Run: python3 demos/04_full_run.py [DIR]
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

from marketrel import pipeline
from marketrel.market_data import write_markets, write_price_series
from marketrel.synthetic import PlantedGateway, make_cohort

root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="marketrel-"))
root.mkdir(parents=True, exist_ok=True)
april = make_cohort("April", 2025, 90, seed=1)
may = make_cohort("May", 2025, 70, seed=2)
write_markets(april.markets + may.markets, root / "markets.csv")
write_price_series(list(april.prices.values()) + list(may.prices.values()), root / "prices.csv")
(root / "config.toml").write_text(
    '[inputs]\nmarkets = "markets.csv"\nprices = "prices.csv"\n\n'
    '[run]\ncohorts = ["2025-04", "2025-05"]\ntrials = 5\nbase_seed = 0\noutput_dir = "out"\n',
    encoding="utf-8",
)

config = pipeline.RunConfig.from_toml(root / "config.toml")
config.output_dir = str(root / "out")
outcomes = {m.question: m.outcome for m in april.markets + may.markets}
gateway = PlantedGateway(outcomes, accuracy=0.7, categories=april.categories | may.categories)
manifest = pipeline.run(config, gateway=gateway)

print((root / "out" / "report.md").read_text())
print(f"{len(manifest.artifacts)} artifacts under {root / 'out'}")
