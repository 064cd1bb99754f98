"""Certificate verdict and parallel-space dimension for every catalog model."""
import argparse
import warnings

import numpy as np

from maxrank.catalog import get_model, model_names
from maxrank.linalg_point import IsotropicFieldWarning
from maxrank.parallel import certify


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=5)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    warnings.simplefilter("ignore", IsotropicFieldWarning)
    print(f"{'model':<20}{'dim':>4}  {'verdicts':<28}{'parallel dims':>14}")
    for name in model_names():
        M = get_model(name)
        verdicts, dims = set(), set()
        for x in M.random_points(args.points, rng):
            cert, sp = certify(M, x, "xi")
            verdicts.add(cert.verdict)
            dims.add(sp.dimension)
        print(f"{name:<20}{M.dim:>4}  {','.join(sorted(verdicts)):<28}{','.join(map(str, sorted(dims))):>14}")


if __name__ == "__main__":
    main()
