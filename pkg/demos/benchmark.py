# Time the analyzer on a synthetic corpus shaped like a desk-sized ML team:
# 31 models, about 5 activities and 41 dependencies per model, about 4600
# lexemes per artifact, a fifth of the models reading another model's output.
#
# The same run from the shell:
#   depmap bench --spec demos/desk_scale.json --seed 7 --out bench.csv

import statistics
import sys
from pathlib import Path

from depmap.bench import BenchSpec, run_bench, zeta_sweep

spec = BenchSpec.load(Path(__file__).with_name("desk_scale.json"), seed=int(sys.argv[1]) if len(sys.argv) > 1 else 7)
result = run_bench(spec, repetitions=3)
print(result.to_csv())

geo = statistics.geometric_mean
print(f"geometric means: {geo(r.no_act for r in result.rows):.1f} activities, "
      f"{geo(r.no_dep for r in result.rows):.1f} deps, {geo(r.avg_act_size for r in result.rows):.0f} tokens, "
      f"{result.geomean_ms():.1f} ms")
print(f"slowest model: {max(r.t_ms for r in result.rows):.0f} ms")
print(f"models needing cross-graph inference: {len(result.inter_graph)}")
print(f"all maps equal to the planted ones: {result.all_correct()}")

# +
# Across the corpus |ζ| grows with graph size, so it correlates with time.
print(f"corpus-wide spearman(|zeta|, T) = {result.spearman_rho:.2f} (p = {result.spearman_p:.3f})")

# Holding activities, statements and lexemes fixed and varying only how many
# reads reach the model isolates |ζ|.
sweep = zeta_sweep(points=20, repetitions=5)
for k, t in zip(sweep.zeta_sizes, sweep.t_ms):
    print(f"|zeta| = {k:2d}  {t:6.1f} ms")
print(f"fixed-size spearman = {sweep.spearman_rho:.2f} (p = {sweep.spearman_p:.2f}), "
      f"relative change over the range = {sweep.relative_effect:+.2f}")
