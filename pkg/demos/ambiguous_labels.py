"""Six observed labels, three real classes: which combination does each criterion pick?

Classes 1/2, 3/4 and 5/6 are drawn from the same Gaussian, so a classifier
cannot tell them apart. Accuracy alone rewards merging as much as possible;
ITCA trades accuracy against how much label information survives.

    python demos/ambiguous_labels.py
"""
from itca.classifiers import ClassifierSpec
from itca.data import SimulationConfig, simulate
from itca.partitions import parse_partition
from itca.search import SearchConfig, make_evaluator, search

truth = parse_partition("{(1,2),(3,4),(5,6)}")
ds = simulate(SimulationConfig(truth, seed=0))
print(f"{ds.n} points, d={ds.d}, observed labels 1..{ds.k0}; truth {truth}\n")

cfg = SearchConfig("exhaustive", "itca", ClassifierSpec("lda"))
ev = make_evaluator(ds, cfg)  # one evaluator, so every criterion reuses the same fits

for criterion in ("itca", "acc", "mi", "pe", "aac_proportion"):
    tr = search(ds, SearchConfig("exhaustive", criterion, cfg.classifier), ev)
    print(f"{criterion:>15}: {str(tr.best):<24} K={tr.best.k}  value {tr.best_value:.4f}")

# best ITCA at each K, the curve the analyze command plots
tr = search(ds, cfg, ev)
best = {}
for p, rep in tr.evaluated:
    if p.k not in best or rep.mean > best[p.k][1].mean:
        best[p.k] = (p, rep)
print("\nbest ITCA by K")
for k in sorted(best):
    p, rep = best[k]
    bar = "#" * int(40 * rep.mean / tr.best_value)
    print(f"  K={k}  {rep.mean:.4f} +- {rep.stderr:.4f}  {bar}  {p}")

# greedy gets there with far fewer fits
g = search(ds, SearchConfig("greedy", "itca", cfg.classifier), ev)
print(f"\ngreedy: {g.best} after {g.evaluation_count} of {tr.evaluation_count} combinations")
