#!/usr/bin/env python3
"""Reference solution of an (s,a)-rectangular KL-robust soft MDP in 50-digit arithmetic.

Usage: make_golden.py MDP.json RADIUS ETA OUT.json

The inner minimum is solved through its one-dimensional dual, with lambda found by bisection
on KL(q_lambda || q0) = radius. Value iteration runs until the update changes by < 1e-40.
"""
import json
import sys

import mpmath as mp

mp.mp.dps = 50


def worst_case(ref, vals, beta):
    if beta == 0:
        return mp.fsum(p * v for p, v in zip(ref, vals))
    vmin = min(vals)
    mass = mp.fsum(p for p, v in zip(ref, vals) if v == vmin)
    if -mp.log(mass) <= beta:
        return vmin

    def tilt(lam):
        w = [p * mp.e ** (-(v - vmin) / lam) for p, v in zip(ref, vals)]
        z = mp.fsum(w)
        q = [x / z for x in w]
        kl = mp.fsum(x * mp.log(x / p) for x, p in zip(q, ref) if x > 0)
        return q, kl

    lo, hi = mp.mpf("1e-30"), mp.mpf(1)
    while tilt(hi)[1] > beta:
        hi *= 2
    for _ in range(400):
        mid = mp.sqrt(lo * hi)
        if tilt(mid)[1] > beta:
            lo = mid
        else:
            hi = mid
    q, _ = tilt(hi)
    return mp.fsum(x * v for x, v in zip(q, vals))


def main():
    mdp_path, radius, eta, out = sys.argv[1], mp.mpf(sys.argv[2]), mp.mpf(sys.argv[3]), sys.argv[4]
    doc = json.load(open(mdp_path))
    ns, na, gamma = doc["n_states"], doc["n_actions"], mp.mpf(repr(doc["gamma"]))
    rewards = [[mp.mpf(repr(x)) for x in row] for row in doc["rewards"]]
    rows = {}
    for s, a, sp, p in doc["transitions"]:
        if p > 0:
            rows.setdefault((s, a), []).append((sp, mp.mpf(repr(p))))

    def q_table(v):
        h = []
        for s in range(ns):
            row = []
            for a in range(na):
                succ = rows[(s, a)]
                w = worst_case([p for _, p in succ], [v[sp] for sp, _ in succ], radius)
                row.append(rewards[s][a] + gamma * w)
            h.append(row)
        return h

    def lse(row):
        m = max(row)
        return m + eta * mp.log(mp.fsum(mp.e ** ((x - m) / eta) for x in row))

    v = [mp.mpf(0)] * ns
    for _ in range(100000):
        h = q_table(v)
        nv = [lse(row) for row in h]
        diff = max(abs(x - y) for x, y in zip(nv, v))
        v = nv
        if diff < mp.mpf("1e-40"):
            break
    h = q_table(v)
    policy = []
    for row in h:
        z = lse(row)
        policy.append([float(mp.e ** ((x - z) / eta)) for x in row])
    json.dump({"radius": float(radius), "eta": float(eta), "value": [float(x) for x in v],
               "policy": policy}, open(out, "w"), indent=2)


if __name__ == "__main__":
    main()
