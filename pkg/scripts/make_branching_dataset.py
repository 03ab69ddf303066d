"""Regenerate the bundled small-vessel branching table.

Fifteen branch orders per tree, diameters log-spaced from 8 um to 2 mm.
Counts follow N ~ d^-2.5 so mean speed grows as sqrt(d); lengths are
proportional to diameter and scaled so one pass through the arterial tree
takes 2.5 s and one pass through the venous tree 3.5 s at 5.4 L per 60 s.

    python scripts/make_branching_dataset.py > src/hemoswarm/data/branching_v1.csv
"""

import math
import sys

BLOOD_VOLUME = 5.4e-3
CIRCULATION_TIME = 60.0
N_ORDERS = 15
D_MIN, D_MAX = 8e-6, 2e-3
SPEED_AT_D_MIN = 1.5e-3
TREE_TIME = {"arterial": 2.5, "venous": 3.5}


def rows():
    flow = BLOOD_VOLUME / CIRCULATION_TIME
    n_min = flow / (math.pi / 4 * D_MIN**2 * SPEED_AT_D_MIN)
    for tree, budget in TREE_TIME.items():
        geom = []
        for k in range(N_ORDERS):
            d = D_MIN * (D_MAX / D_MIN) ** (k / (N_ORDERS - 1))
            count = max(1, round(n_min * (d / D_MIN) ** -2.5))
            v = flow / (count * math.pi / 4 * d**2)
            geom.append((d, count, v))
        # lengths proportional to d, scaled to the tree's time budget
        unit = budget / sum(d / v for d, _, v in geom)
        for k, (d, count, v) in enumerate(geom, start=1):
            yield tree, k, d, unit * d, count


def main(out=sys.stdout):
    out.write("tree,order,diameter_m,length_m,count\n")
    for tree, order, d, length, count in rows():
        out.write(f"{tree},{order},{d:.6e},{length:.6e},{count}\n")


if __name__ == "__main__":
    main()
