"""Split the spin-flip chain (example3) by global X and by X on odd sites.

The flips on odd sites commute with H and with every jump, so they are a
second strong symmetry.  This prints the degeneracy in each joint sector.
"""
import argparse
import itertools
import json

from mixanom import anomaly, lindblad, models
from mixanom.models import ModelId


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sizes", type=int, nargs="+", default=[4, 6])
    args = p.parse_args()

    table = {}
    for L in args.sizes:
        odd = models.flips(range(1, L + 1, 2))
        model = models.build_model(ModelId("example3", L=L))
        strong = lindblad.check_symmetry(model, anomaly.z2_product_group([("Xodd", odd, True)]))
        table[f"L={L} odd flips strong"] = strong.passed
        for bc in ("pbc", "obc"):
            mid = ModelId("example3", L=L, bc=bc)
            model = models.build_model(mid)
            row = {}
            for x, xo in itertools.product((1, -1), repeat=2):
                secs = models.sector_spec(mid, x) + [lindblad.SectorSpec(odd.unitary(), xo, f"Xodd={xo:+d}")]
                row[f"X={x:+d} Xodd={xo:+d}"] = lindblad.steady_states(model, secs, decompose=False).degeneracy
            table[f"L={L} {bc}"] = row
    print(json.dumps(table, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
