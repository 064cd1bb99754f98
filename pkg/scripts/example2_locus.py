"""Sweep the contact (kappa, mu) grid, write the CSV and compare the detected
boundary with kappa^2 - (1 - kappa) mu^2 = 0."""
import argparse

from maxrank.nullity import (
    boundary_points,
    distance_to_curve,
    example2_curve,
    example_report,
    grid_axis,
    write_csv,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--spacing", type=float, default=0.01)
    ap.add_argument("--out", default="example2_locus.csv")
    args = ap.parse_args()

    ks = grid_axis(-1.0, 0.99, args.spacing)
    ms = grid_axis(-2.0, 2.0, args.spacing)
    rows = example_report("example2", ks, ms)
    with open(args.out, "w", newline="\n") as fh:
        write_csv(rows, fh)
    pts = boundary_points(ks, ms, rows)
    dist = distance_to_curve(pts, example2_curve())
    deficient = sum(r.verdict == "deficient" for r in rows)
    print(f"{len(rows)} grid points, {deficient} deficient, {len(pts)} boundary points")
    print(f"max distance of boundary to the analytic curve: {dist.max():.5f} (spacing {args.spacing})")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
