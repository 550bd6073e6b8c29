"""Steady-state degeneracy per strong sector for the chain models, as CSV."""
import argparse
import csv
import sys
from fractions import Fraction

from mixanom import lindblad, models
from mixanom.models import ModelId


def sectors(mid):
    if mid.name == "example1":
        return models.valid_charges(mid)
    return [1, -1]


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sizes", type=int, nargs="+", default=[4, 6])
    p.add_argument("--models", nargs="+", default=["example1", "example2", "example3", "cluster_aspt"])
    args = p.parse_args()

    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["model", "L", "bc", "sector", "degeneracy", "closed_form_states", "status"])
    for name in args.models:
        for L in args.sizes:
            for bc in ("pbc", "obc"):
                mid = ModelId(name, L=L, bc=bc)
                model = models.build_model(mid)
                for sec in sectors(mid):
                    res = lindblad.steady_states(model, models.sector_spec(mid, sec), decompose=False)
                    try:
                        n_closed = len(models.closed_form_steady(mid, sec, verify=False))
                    except models.ModelError:
                        n_closed = ""
                    out.writerow([name, L, bc, Fraction(sec), res.degeneracy, n_closed, res.status])


if __name__ == "__main__":
    main()
