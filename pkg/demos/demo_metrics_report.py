"""Evaluation views over a synthetic outcome matrix.

Forty bugs, four configurations, deterministic pass pattern: the
history heuristics each pick up a different slice of bugs the baseline
misses, so every report view has something to show.
"""

import random
from decimal import Decimal
from fractions import Fraction

from histrepair import metrics

CONFIGS = ("non_history", "fn_all", "fn_pair", "fl_diff")
CATEGORIES = ("SL", "SH", "SFMH", "MFMH")

rng = random.Random(42)
rows = []
for i in range(40):
    bug = f"bug-{i:03d}"
    category = CATEGORIES[i % 4]
    # baseline solves the easy half; each heuristic adds its own wins
    solved_by = {"non_history": i % 2 == 0,
                 "fn_all": i % 2 == 0 or i % 5 == 1,
                 "fn_pair": i % 2 == 0 or i % 7 == 3,
                 "fl_diff": i % 2 == 0 or i % 3 == 1}
    for config in CONFIGS:
        passed = solved_by[config]
        rows.append(metrics.OutcomeRow(
            bug_id=bug, category=category, config=config, passed=passed,
            steps=rng.randint(3, 12) if passed else 50,
            cost=Decimal(f"0.{rng.randint(10, 99):02d}0000"),
            termination="CompletedSignal" if passed else "StepLimit",
        ))

table = metrics.metrics_table(rows)
print(metrics.render_metrics_table(table))

base = [r for r in rows if r.config == "non_history"]
fl = [r for r in rows if r.config == "fl_diff"]
print(f"baseline rate: {metrics.plausible_at_1(base)} "
      f"= {float(metrics.plausible_at_1(base)):.3f}")
print(f"fl_diff unique over baseline: {metrics.unique_pass(fl, base)}")

# which exact subset of configs solves each region of the pass union
overlap = metrics.overlap_regions(rows)
print(f"\npass union: {overlap.union_size} bugs, split by exact solver set:")
for combo, n in overlap.to_json().items():
    if n:
        print(f"  {combo}: {n}")

# cost of running combos of configs vs. what they jointly solve
frontier = metrics.tradeoff_frontier(rows)
print("\nfrontier (size, combo, rate, avg cost):")
for pt in frontier:
    print(f"  {len(pt.combo)}  {'+'.join(pt.combo):<40} "
          f"{float(pt.success_rate):.3f}  {float(pt.avg_cost):.4f}")

best_single = max((p for p in frontier if len(p.combo) == 1),
                  key=lambda p: p.success_rate)
print(f"\nbest single config: {best_single.combo[0]} "
      f"at rate {float(best_single.success_rate):.3f}")
assert frontier[-1].success_rate == Fraction(overlap.union_size, 40)

matched = metrics.matched_set(rows)
print(f"matched set (passed by all four): {len(matched)} bugs")
