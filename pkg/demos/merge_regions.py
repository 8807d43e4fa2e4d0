"""When does merging two look-alike classes pay off?

Classes 1 and 2 share a distribution and have probabilities p1, p2; class 3
is far away. The maps show where the merge raises population ITCA ('+') for
an idealized classifier and for LDA with well separated classes.

    python demos/merge_regions.py
"""
import numpy as np

from itca.theory import lda_delta, oracle_delta, region_grid

res = 24
c = (np.arange(res) + 0.5) / res


def show(name, f):
    print(name)
    for b in c[::-1]:
        row = ""
        for a in c:
            row += " " if a + b >= 1 else ("+" if f(a, b) > 0 else ".")
        print(f"  {b:4.2f} |{row}")
    print("        " + "-" * res + "  p1 ->\n")


show("oracle", oracle_delta)
show("lda, separation -> infinity", lambda a, b: lda_delta(a, b, limit=True))

for alg in ("oracle", "lda_limit"):
    print(f"{alg:>10}: merge region covers {region_grid(alg, 200).area_fraction:.3f} of the simplex")
print("both curves pass through (0.25, 0.25):", oracle_delta(0.25, 0.25), lda_delta(0.25, 0.25, limit=True))
