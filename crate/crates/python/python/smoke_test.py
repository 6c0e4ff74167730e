"""Smoke test for the chebclust_py extension module.

Build and install first, e.g. `pip install --no-build-isolation -e crates/python`
(needs maturin), or copy the built library next to this script as
chebclust_py.so.
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import chebclust_py as cc


def main():
    t = [i / 100 for i in range(101)]
    s1 = [1 - 0.5 * x for x in t]
    s2 = [0.5 * x for x in t]
    env = cc.Envelope.from_signals(t, [s1, s2], ids=["s1", "s2"])
    basis = cc.Basis.monomial(1)

    delta_star, witnesses = env.lower_bound()
    assert abs(delta_star - 0.5) < 1e-12 and witnesses == [0], (delta_star, witnesses)

    rep = cc.solve_exchange(env, basis)
    assert abs(rep.delta - 0.5) < 1e-9, rep
    assert rep.termination == "optimal-double-point", rep

    coeffs, z, status = cc.solve_lp(env, basis)
    assert status == "optimal" and abs(z - 0.5) < 1e-9, (z, status)

    for k in (-0.25, 0.0, 0.25):
        v = cc.check(env, basis, [0.5, k])
        assert v.optimal and abs(v.delta - 0.5) < 1e-9, v
    assert not cc.check(env, basis, [0.4, 0.0]).optimal

    e = [math.exp(x) for x in t]
    env = cc.Envelope(t, e, e)
    cheb = cc.Basis.chebyshev(2, 0.0, 1.0)
    cold = cc.solve_exchange(env, cheb)
    assert cold.termination == "optimal-alternation" and len(cold.nodes) == 4, cold
    warm = cc.solve_exchange(env, cheb, warm_nodes=cold.nodes, warm_sides=cold.sides)
    assert abs(warm.delta - cold.delta) < 1e-9 and warm.warm_start == "used", warm

    rows = [[0.05 * math.sin(7 * x + i) for x in t] for i in range(5)]
    rows += [[10 + 0.05 * math.cos(5 * x + i) for x in t] for i in range(5)]
    res = cc.cluster(t, rows, k=2, degree=0)
    assert res.converged, res
    assert len(set(res.assignment[:5])) == 1 and len(set(res.assignment[5:])) == 1
    assert res.assignment[0] != res.assignment[5]

    try:
        cc.cluster(t, rows[:1], k=2)
    except cc.ChebclustError as e:
        assert "insufficient data" in str(e)
    else:
        raise AssertionError("expected ChebclustError")

    print("smoke test passed:", rep, res)


if __name__ == "__main__":
    main()
