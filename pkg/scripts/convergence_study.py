"""Tension and odd-extension refinement tables as CSV on stdout.

    python scripts/convergence_study.py [--resolutions 21 41 81 161]
"""
import argparse
import csv
import sys

from reflectlab.cli import closed_form_map, parse_space
from reflectlab.harness import schwarz_refinement_study
from reflectlab.solver import DiscreteMap, make_grid, observed_order, tension_refinement


def tension_rows(resolutions):
    source = parse_space("euclidean_c:1")
    rows = []
    for target_kind in ("euclidean_c:1", "chyp_ball:1", "cproj:1"):
        target = parse_space(target_kind)
        f = closed_form_map("z**2", target)
        maps = []
        for n in resolutions:
            dom = make_grid(source, [[-0.6, 0.6], [-0.6, 0.6]], n)
            maps.append(DiscreteMap(dom, target, f(dom.coords)))
        hs, errs = tension_refinement(maps)
        order = observed_order(hs, errs) if max(errs) > 1e-10 else float("nan")
        for n, h, e in zip(resolutions, hs, errs):
            rows.append({"study": f"tension z^2 -> {target_kind}", "resolution": n, "h": h,
                         "residual": e, "fitted_order": order})
    return rows


def schwarz_rows(resolutions):
    rows = []
    for shape in ("disk", "box"):
        rep = schwarz_refinement_study(resolutions=resolutions, shape=shape)
        for r in rep.tables["refinement"]:
            rows.append({"study": f"odd extension ({shape})", **r})
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--resolutions", type=int, nargs="+", default=[21, 41, 81])
    args = ap.parse_args(argv)
    rows = tension_rows(args.resolutions) + schwarz_rows(tuple(args.resolutions))
    fields = []
    for r in rows:
        fields += [k for k in r if k not in fields]
    writer = csv.DictWriter(sys.stdout, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)


if __name__ == "__main__":
    main()
