"""Split setosa in two at random and see whether ITCA glues it back together.

    python demos/iris_halves.py [n_seeds]
"""
import sys
from pathlib import Path

from itca.classifiers import ClassifierSpec
from itca.data import load_csv, split_class
from itca.partitions import parse_partition
from itca.search import SearchConfig, search

iris, mapping = load_csv(Path(__file__).resolve().parents[1] / "tests" / "data" / "iris.csv")
print("labels:", mapping)
want = parse_partition("{(1,2),3,4}")
seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 20

hits = 0
for seed in range(seeds):
    ds = split_class(iris, 1, seed)
    cfg = SearchConfig("exhaustive", "itca", ClassifierSpec("lda", seed=seed), ordinal=False, seed=seed)
    tr = search(ds, cfg)
    top = sorted(tr.evaluated, key=lambda t: -t[1].mean)[:2]
    ok = tr.best == want
    hits += ok
    (p1, r1), (p2, r2) = top
    print(f"seed {seed:>2}  {'ok ' if ok else 'MISS'} best {p1} {r1.mean:.4f}+-{r1.stderr:.4f}"
          f"   runner-up {p2} {r2.mean:.4f}")
print(f"\nhalves re-merged on {hits}/{seeds} seeds")
