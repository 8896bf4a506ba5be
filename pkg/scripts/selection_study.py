"""How often sequential and simultaneous selection recover (T, M) = (3, 2)."""

import argparse
import collections

from mlca import baseline_truth, generate, select_sequential, select_simultaneous


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--groups", "-J", type=int, default=50)
    ap.add_argument("--units", "-n", type=int, default=100)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    truth = baseline_truth()
    tally = collections.Counter()
    for seed in range(1, args.seeds + 1):
        d = generate(truth, args.groups, args.units, seed=seed).dataset
        seq = select_sequential(d, range(1, 5), range(1, 4), seed=seed).winner
        sim = select_simultaneous(d, range(1, 5), range(1, 4), seed=seed, workers=args.threads).winner
        tally["sequential", seq] += 1
        tally["simultaneous", sim] += 1
        print(f"seed {seed}: sequential {seq}, simultaneous {sim}")
    for (strategy, winner), count in sorted(tally.items()):
        print(f"{strategy:>12} {winner}: {count}/{args.seeds}")


if __name__ == "__main__":
    main()
