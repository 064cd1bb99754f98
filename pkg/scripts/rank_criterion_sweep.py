"""Compare the omega_{d-1} verdict with SVD rank on random catalog Jacobi operators."""
import argparse
import collections
import time

from maxrank.linalg_point import max_rank_certificate, numerical_rank
from maxrank.sampling import sample_jacobi_operators


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    t0 = time.perf_counter()
    samples = sample_jacobi_operators(args.count, seed=args.seed)
    tally = collections.defaultdict(lambda: [0, 0, 0])  # maximal, deficient, disagreements
    for s in samples:
        cert = max_rank_certificate(s.J, s.xi, s.g)
        row = tally[s.model]
        row[0 if cert.maximal else 1] += 1
        row[2] += (numerical_rank(s.J) == len(s.xi) - 1) != cert.maximal
    print(f"{'model':<20}{'maximal':>9}{'deficient':>11}{'disagree':>10}")
    for name in sorted(tally):
        m, d, x = tally[name]
        print(f"{name:<20}{m:>9}{d:>11}{x:>10}")
    total = sum(r[2] for r in tally.values())
    print(f"{len(samples)} operators, {total} disagreements, {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
