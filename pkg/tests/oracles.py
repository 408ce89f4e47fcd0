"""Independent straight-line reimplementations used as test oracles.

These deliberately avoid the package's own helpers so that agreement is
meaningful. They work on plain tuples and dicts.
"""

from __future__ import annotations

from fractions import Fraction


def backtest_one(q_i, q_j, same, markets, prices, cut=0.1, final_cut=0.1):
    """Return a dict describing the outcome of trading one pair.

    ``markets`` maps question -> (resolved_datetime, "YES"|"NO").
    ``prices`` maps question -> list of (datetime, yes_price), sorted.
    """
    ti, oi = markets[q_i]
    tj, oj = markets[q_j]
    if ti == tj:
        return {"skip": "LEADER_TIE", "gap": 0.0}
    if ti < tj:
        lead_q, lead_t, lead_o, fol_q, fol_t, fol_o = q_i, ti, oi, q_j, tj, oj
    else:
        lead_q, lead_t, lead_o, fol_q, fol_t, fol_o = q_j, tj, oj, q_i, ti, oi
    gap = (fol_t - lead_t).total_seconds() / 86400.0
    ticks = prices.get(fol_q, [])
    if not ticks:
        return {"skip": "NO_TICK_AFTER_RESOLUTION", "gap": gap, "leader": lead_q}
    entry = None
    for when, p in ticks:
        if when > lead_t:
            entry = (when, p)
            break
    if entry is None or entry[0] >= fol_t:
        return {"skip": "NO_TICK_AFTER_RESOLUTION", "gap": gap, "leader": lead_q}
    if lead_o == "YES" and same:
        side = "BUY_YES"
    elif lead_o == "NO" and not same:
        side = "BUY_YES"
    else:
        side = "BUY_NO"
    price = entry[1] if side == "BUY_YES" else 1 - entry[1]
    base = {"gap": gap, "leader": lead_q, "side": side, "entry_time": entry[0], "entry_price": price}
    exact = Fraction(str(entry[1])) if side == "BUY_YES" else 1 - Fraction(str(entry[1]))
    if exact < Fraction(str(cut)) or exact > 1 - Fraction(str(cut)):
        return base | {"skip": "ENTRY_TOO_EXTREME"}
    last = ticks[-1][1]
    if final_cut < last < 1 - final_cut:
        return base | {"skip": "FINAL_PRICE_AMBIGUOUS"}
    leg_yes = side == "BUY_YES"
    won = leg_yes == (fol_o == "YES")
    return base | {"skip": "NONE", "pnl": (1 - price) if won else -price}


def accuracy(rows):
    """``rows``: (cluster_id, predicted_same, outcome_i, outcome_j, confidence).

    Returns (cluster_average, pooled) as exact Fractions, or None.
    """
    per = {}
    for cid, pred, oi, oj, conf in rows:
        if conf < 0.5:
            continue
        hit = 1 if pred == (oi == oj) else 0
        c, n = per.get(cid, (0, 0))
        per[cid] = (c + hit, n + 1)
    if not per:
        return None, None
    avg = sum(Fraction(c, n) for c, n in per.values()) / len(per)
    pooled = Fraction(sum(c for c, _ in per.values()), sum(n for _, n in per.values()))
    return avg, pooled
