"""Clustering class centers versus ITCA when the look-alike classes are both big.

Center clustering merges classes 1 and 2 because their centers coincide. LDA,
though, predicts one of the two almost always, so keeping both labels keeps
more information and ITCA prefers not to merge.

    python demos/clustering_baselines.py
"""
from itca.baselines import LINKAGES, hierarchical_combine, kmeans_combine
from itca.classifiers import ClassifierSpec
from itca.data import SimulationConfig, simulate
from itca.partitions import parse_partition
from itca.search import SearchConfig, make_evaluator, search
from itca.theory import lda_delta

truth = parse_partition("{(1,2),3}")
for probs in [(0.05, 0.3, 0.65), (0.4, 0.4, 0.2)]:
    ds = simulate(SimulationConfig(truth, class_probs=probs, step_length=15.0, seed=1))
    cfg = SearchConfig("exhaustive", "itca", ClassifierSpec("lda"), ordinal=False)
    ev = make_evaluator(ds, cfg)
    tr = search(ds, cfg, ev)
    print(f"class probabilities {probs}; predicted merge gain {lda_delta(*probs[:2], limit=True):+.4f}")
    print(f"  ITCA picks      {tr.best}  ({tr.best_value:.4f})")
    km = kmeans_combine(ds, 2, seed=1)
    print(f"  k-means         {km}  ({ev.report('itca', km).mean:.4f})")
    for link in LINKAGES:
        p = hierarchical_combine(ds, 2, link)
        print(f"  {link:<15} {p}  ({ev.report('itca', p).mean:.4f})")
    print()
