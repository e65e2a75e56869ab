"""Information horizons of the two chain families, ground vs abstract.

    python scripts/chain_horizons.py
"""

import math

from bamdp.abstraction import EpistemicAbstraction, build_greedy_cover, build_lattice_cover, induce_abstract_bamdp
from bamdp.envs import make_bernoulli_chain, make_two_chain
from bamdp.info_horizon import abstract_information_horizon, information_horizon
from bamdp.verification import reachable_beliefs


def fmt(v):
    return "inf" if v == math.inf else str(int(v))


def main():
    print("counter chain (H=3)")
    for q in (0.8, 0.9, 1.0):
        m = make_bernoulli_chain(q, 3)
        ab = induce_abstract_bamdp(m, EpistemicAbstraction(build_lattice_cover(2, 0.25)))
        print(f"  q={q}: I={fmt(information_horizon(m).value)}  I_phi(delta=0.25)={fmt(abstract_information_horizon(ab).value)}")

    print("two-chain family")
    for N in (1, 2, 3, 4, 5):
        m = make_two_chain(N)
        coarse = build_greedy_cover(reachable_beliefs(m), 0.5)
        ab = induce_abstract_bamdp(m, EpistemicAbstraction(coarse))
        print(f"  N={N}: I={fmt(information_horizon(m).value)}  I_phi(coarse, {len(coarse)} centers)={fmt(abstract_information_horizon(ab).value)}")


if __name__ == "__main__":
    main()
