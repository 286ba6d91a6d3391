"""First-slot decoding rate per lambda: binomial prediction, count-based ideal, GF(2) decoder.

The gap between the last two columns is the price of binary coding: with two
or more parity checks a binary code cannot repair every erasure pattern it has
enough equations for.

    python3 scripts/first_slot_check.py --lambdas 1 2 4 6 12 --sets 4000
"""

import argparse

from iecs.channel import Uniform
from iecs.harmonic import SystemConfig, first_slot_success_prob
from iecs.metrics import first_slot_study


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--lambdas", type=int, nargs="+", default=[1, 2, 4, 6, 12])
    parser.add_argument("--pe", type=float, default=0.1)
    parser.add_argument("--sets", type=int, default=4000, help="position sets per lambda")
    parser.add_argument("--clients", type=int, default=32)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    k = max(1, -(-args.sets // args.clients))
    print("lambda,sets,binomial,ideal_count,gf2_decoder")
    for lam in args.lambdas:
        config = SystemConfig(n=32, M=7, R=1, lam=lam, k=k, payload_bytes=1, seed=args.seed)
        study = first_slot_study(config, Uniform(args.pe), clients=args.clients)
        exact = first_slot_success_prob(7, 1, lam, args.pe)
        print(f"{lam},{study.sets},{exact:.5f},{study.sufficient_rate:.5f},{study.decoded_rate:.5f}")


if __name__ == "__main__":
    main()
