"""Writes the discrete DGP fixtures and prints brute-force marginal means.

The sums below are written out longhand over every (v, l, x) state, without
sharing any code with the C++ library, so the printed constants can be pinned
as regression values in the test suite.
"""
import itertools
import json
import math
import pathlib

HERE = pathlib.Path(__file__).parent
NAMES = {"V": "v", "D": "d", "L": "l", "X": "x", "Y": "y"}


def bern(p):
    return [1.0 - p, p]


def binary_dgp():
    p_l = {(0, 0): .25, (0, 1): .55, (1, 0): .40, (1, 1): .70}
    p_x = {(0, 0, 0): .20, (0, 0, 1): .45, (0, 1, 0): .40, (0, 1, 1): .70,
           (1, 0, 0): .30, (1, 0, 1): .55, (1, 1, 0): .50, (1, 1, 1): .80}
    p_y = {(0, 0, 0, 0): .15, (0, 0, 0, 1): .40, (0, 0, 1, 0): .35, (0, 0, 1, 1): .70,
           (0, 1, 0, 0): .30, (0, 1, 0, 1): .60, (0, 1, 1, 0): .50, (0, 1, 1, 1): .88,
           (1, 0, 0, 0): .25, (1, 0, 0, 1): .50, (1, 0, 1, 0): .45, (1, 0, 1, 1): .80,
           (1, 1, 0, 0): .40, (1, 1, 0, 1): .70, (1, 1, 1, 0): .60, (1, 1, 1, 1): .95}
    return {
        "names": NAMES,
        "support": {"V": [0, 1], "D": [0, 1], "L": [0, 1], "X": [0, 1], "Y": [0, 1]},
        "p_v": [0.6, 0.4],
        "p_d": [bern(.35), bern(.60)],
        "p_l": [[bern(p_l[(v, d)]) for d in (0, 1)] for v in (0, 1)],
        "p_x": [[[bern(p_x[(v, d, l)]) for l in (0, 1)] for d in (0, 1)] for v in (0, 1)],
        "p_y": [[[[bern(p_y[(v, d, l, x)]) for x in (0, 1)] for l in (0, 1)]
                 for d in (0, 1)] for v in (0, 1)],
    }


def zero_indirect_dgp():
    # L ignores D and X ignores D, so the randomized X distribution is the same
    # under both treatment arms.
    g = binary_dgp()
    g["p_l"] = [[bern(.3), bern(.3)], [bern(.5), bern(.5)]]
    g["p_x"] = [[[bern(.25), bern(.6)], [bern(.25), bern(.6)]],
                [[bern(.35), bern(.7)], [bern(.35), bern(.7)]]]
    return g


def x_indep_l_dgp():
    # X depends on (V, D) only: interventional and natural means coincide.
    g = binary_dgp()
    g["p_x"] = [[[bern(.2), bern(.2)], [bern(.55), bern(.55)]],
                [[bern(.3), bern(.3)], [bern(.65), bern(.65)]]]
    return g


def ordinal_dgp():
    # Y has three ordered levels generated by a proportional-odds model whose
    # linear predictor is saturated in (v, d, l, x).
    g = binary_dgp()
    g["support"]["Y"] = [0, 1, 2]
    tau = [0.2, 1.6]

    def logistic(t):
        return 1.0 / (1.0 + math.exp(-t))

    p_y = []
    for v in (0, 1):
        pv = []
        for d in (0, 1):
            pd = []
            for l in (0, 1):
                pl = []
                for x in (0, 1):
                    eta = 0.4 * v + 0.6 * d + 0.5 * l + 0.7 * x + 0.3 * d * x - 0.2 * v * l
                    c1 = logistic(tau[0] - eta)
                    c2 = logistic(tau[1] - eta)
                    pl.append([c1, c2 - c1, 1.0 - c2])
                pd.append(pl)
            pv.append(pd)
        p_y.append(pv)
    g["p_y"] = p_y
    return g


def expect_y(g, v, d, l, x):
    return sum(val * p for val, p in zip(g["support"]["Y"], g["p_y"][v][d][l][x]))


def psi(g, d1, d2, d3):
    total = 0.0
    for v, l, x in itertools.product(range(2), range(2), range(2)):
        total += (expect_y(g, v, d3, l, x) * g["p_x"][v][d2][l][x]
                  * g["p_l"][v][d1][l] * g["p_v"][v])
    return total


def lam(g, d1, d2):
    total = 0.0
    for v, l, x in itertools.product(range(2), range(2), range(2)):
        px_marg = sum(g["p_x"][v][d1][ll][x] * g["p_l"][v][d1][ll] for ll in range(2))
        total += expect_y(g, v, d2, l, x) * g["p_l"][v][d2][l] * px_marg * g["p_v"][v]
    return total


def main():
    fixtures = {
        "binary_dgp": binary_dgp(),
        "zero_indirect_dgp": zero_indirect_dgp(),
        "x_indep_l_dgp": x_indep_l_dgp(),
        "ordinal_dgp": ordinal_dgp(),
    }
    for name, g in fixtures.items():
        (HERE / f"{name}.json").write_text(json.dumps(g, indent=1) + "\n")
        print(name)
        for a in itertools.product((0, 1), repeat=3):
            print(f"  psi{a} = {psi(g, *a):.17g}")
        for a in itertools.product((0, 1), repeat=2):
            print(f"  lambda{a} = {lam(g, *a):.17g}")


if __name__ == "__main__":
    main()
