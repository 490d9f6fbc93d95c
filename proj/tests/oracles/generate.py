#!/usr/bin/env python3
"""Reference values for the C++ tests, evaluated with mpmath at 50 digits.

Every quantity is recomputed here from its defining formula, without
reusing any C++ code path. Run from anywhere:

    python3 tests/oracles/generate.py > tests/oracles/frozen_values.json
"""
import json
import sys
import random

import mpmath as mp

mp.mp.dps = 50


def f(x):
    return float(x)


def cmul(a, b):
    return (a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0])


def rotate_distance(h, phase, t):
    # h, t: lists of complex pairs; phase: angles
    total = mp.mpf(0)
    for (hr, hi), th, (tr, ti) in zip(h, phase, t):
        rr, ri = cmul((hr, hi), (mp.cos(th), mp.sin(th)))
        total += (rr - tr) ** 2 + (ri - ti) ** 2
    return mp.sqrt(total)


def split(v, k):
    # stored layout: k real parts, then k imaginary parts
    return [(mp.mpf(v[i]), mp.mpf(v[k + i])) for i in range(k)]


def rotate_case(rng, k, lam):
    h = [rng.uniform(-2, 2) for _ in range(2 * k)]
    t = [rng.uniform(-2, 2) for _ in range(2 * k)]
    ph = [rng.uniform(-2, 2) for _ in range(2 * k)]
    pt = [rng.uniform(-2, 2) for _ in range(2 * k)]
    phase = [rng.uniform(-3.1, 3.1) for _ in range(k)]
    H, T, PH, PT = (split(v, k) for v in (h, t, ph, pt))
    ang = [mp.mpf(x) for x in phase]
    L = mp.mpf(lam)
    hh = [(L * a[0] + (1 - L) * b[0], L * a[1] + (1 - L) * b[1]) for a, b in zip(H, PH)]
    tt = [(L * a[0] + (1 - L) * b[0], L * a[1] + (1 - L) * b[1]) for a, b in zip(T, PT)]
    return {
        "k": k, "lambda": lam, "head": h, "tail": t, "p_head": ph, "p_tail": pt, "phase": phase,
        "rotate_score": f(-rotate_distance(H, ang, T)),
        "rpe_rotate_score": f(-rotate_distance(hh, ang, tt)),
    }


def nls(x):
    return -mp.log(1 / (1 + mp.exp(-x)))


def adversarial_loss(f_pos, f_negs, gamma, alpha, convention):
    c = mp.mpf(-1) if convention == "distance" else mp.mpf(1)
    g = mp.mpf(gamma)
    w = [mp.exp(mp.mpf(alpha) * mp.mpf(x)) for x in f_negs]
    z = sum(w)
    p = [x / z for x in w]
    loss = nls(g - c * mp.mpf(f_pos))
    loss += sum(pi * nls(c * mp.mpf(x) - g) for pi, x in zip(p, f_negs))
    return loss


def loss_cases(rng):
    out = [
        {"f_pos": 0.0, "f_neg": [-2.0], "gamma": 1.0, "alpha": 1.0, "convention": "score",
         "loss": f(adversarial_loss(0, [-2], 1, 1, "score"))},
        {"f_pos": 0.0, "f_neg": [-2.0], "gamma": 1.0, "alpha": 1.0, "convention": "distance",
         "loss": f(adversarial_loss(0, [-2], 1, 1, "distance"))},
    ]
    for conv in ("distance", "score"):
        f_pos = rng.uniform(-8, -1)
        f_neg = [rng.uniform(-12, -2) for _ in range(5)]
        out.append({"f_pos": f_pos, "f_neg": f_neg, "gamma": 6.0, "alpha": 0.5, "convention": conv,
                    "loss": f(adversarial_loss(f_pos, f_neg, 6, 0.5, conv))})
    return out


def dbi(clusters):
    cents, scat = [], []
    for c in clusters:
        d = len(c[0])
        cen = [sum(mp.mpf(p[j]) for p in c) / len(c) for j in range(d)]
        cents.append(cen)
        scat.append(sum(mp.sqrt(sum((mp.mpf(p[j]) - cen[j]) ** 2 for j in range(d))) for p in c) / len(c))
    total = mp.mpf(0)
    for i in range(len(clusters)):
        worst = None
        for j in range(len(clusters)):
            if i == j:
                continue
            m = mp.sqrt(sum((a - b) ** 2 for a, b in zip(cents[i], cents[j])))
            r = (scat[i] + scat[j]) / m
            worst = r if worst is None or r > worst else worst
        total += worst
    return total / len(clusters)


def dbi_cases(rng):
    one_d = [[[0.0], [2.0]], [[10.0], [12.0]]]
    rand = []
    for c in range(3):
        rand.append([[rng.gauss(3 * c, 1.0), rng.gauss(-c, 1.0)] for _ in range(4 + c)])
    return [{"clusters": one_d, "dbi": f(dbi(one_d))}, {"clusters": rand, "dbi": f(dbi(rand))}]


def optimizer_cases():
    grads = [0.5, -1.25, 0.75]
    lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
    x, m, v = mp.mpf(1), mp.mpf(0), mp.mpf(0)
    adam = []
    for t, g in enumerate(grads, start=1):
        g = mp.mpf(g)
        m = b1 * m + (1 - mp.mpf(b1)) * g
        v = b2 * v + (1 - mp.mpf(b2)) * g * g
        mh = m / (1 - mp.mpf(b1) ** t)
        vh = v / (1 - mp.mpf(b2) ** t)
        x -= lr * mh / (mp.sqrt(vh) + eps)
        adam.append(f(x))
    x, acc = mp.mpf(1), mp.mpf("0.1")
    adagrad = []
    for g in grads:
        g = mp.mpf(g)
        acc += g * g
        x -= lr * g / (mp.sqrt(acc) + mp.mpf("1e-10"))
        adagrad.append(f(x))
    return {"grads": grads, "learning_rate": lr, "start": 1.0,
            "adam": {"beta1": b1, "beta2": b2, "epsilon": eps, "values": adam},
            "adagrad": {"initial_accumulator": 0.1, "epsilon": 1e-10, "values": adagrad}}


def gcn_case(rng):
    n, rels, k, lam = 5, 2, 3, 0.4
    triples = [[0, 0, 1], [2, 0, 1], [3, 1, 4], [0, 1, 4], [1, 1, 1]]
    ent = [[rng.uniform(-1, 1) for _ in range(k)] for _ in range(n)]
    proto = [[rng.uniform(-1, 1) for _ in range(k)] for _ in range(2 * rels)]
    weights = [[[rng.uniform(-0.8, 0.8) for _ in range(k)] for _ in range(k)] for _ in range(2)]

    nbr = [set() for _ in range(n)]
    pro_of = [set() for _ in range(n)]
    members = [set() for _ in range(2 * rels)]
    for h, r, t in triples:
        if h != t:
            nbr[h].add(t)
            nbr[t].add(h)
        pro_of[h].add(2 * r)
        pro_of[t].add(2 * r + 1)
        members[2 * r].add(h)
        members[2 * r + 1].add(t)

    def matvec(W, x):
        return [sum(mp.mpf(W[a][b]) * x[b] for b in range(k)) for a in range(k)]

    def run(mode):
        L = mp.mpf(lam) if mode == "rpe" else mp.mpf(1)
        E = [[mp.mpf(x) for x in row] for row in ent]
        P = [[mp.mpf(x) for x in row] for row in proto]
        layers = []
        for W in weights:
            WE = [matvec(W, e) for e in E]
            WP = [matvec(W, p) for p in P]
            newE = []
            for i in range(n):
                own = sorted(nbr[i] | {i})
                num = [L * sum(WE[j][d] for j in own) for d in range(k)]
                den = L * len(own)
                if mode == "rpe":
                    for p in pro_of[i]:
                        for d in range(k):
                            num[d] += (1 - L) * WP[p][d]
                    den += (1 - L) * len(pro_of[i])
                newE.append([mp.tanh(x / den) for x in num])
            newP = []
            if mode == "rpe":
                for p in range(2 * rels):
                    num = [L * sum(WE[j][d] for j in members[p]) + (1 - L) * WP[p][d] for d in range(k)]
                    den = L * len(members[p]) + 1 - L
                    newP.append([mp.tanh(x / den) for x in num])
            E, P = newE, newP
            layers.append(E)
        final = [[sum(layers[l][i][d] for l in range(len(layers))) / len(layers) for d in range(k)] for i in range(n)]
        return [[f(x) for x in row] for row in final], [[f(x) for x in row] for row in layers[-1]]

    rpe_all, rpe_last = run("rpe")
    van_all, van_last = run("vanilla")
    return {"entities": n, "relations": rels, "dim": k, "lambda": lam, "activation": "tanh",
            "triples": triples, "entity_inputs": ent, "prototype_inputs": proto, "weights": weights,
            "rpe_mean_of_layers": rpe_all, "rpe_last_layer": rpe_last,
            "vanilla_mean_of_layers": van_all, "vanilla_last_layer": van_last}


def constructed_margin():
    # k = 1, phase 0, head/tail areas of radius 0.1 at 0; another relation's
    # areas at 10. 100-point polar grid per area (10 rings x 10 angles).
    def grid(cx):
        pts = []
        for i in range(100):
            rho = mp.mpf("0.1") * (i // 10 + 1) / 10
            th = 2 * mp.pi * (i % 10) / 10
            pts.append((cx + rho * mp.cos(th), rho * mp.sin(th)))
        return pts
    near, far = grid(0), grid(10)
    dist = lambda a, b: mp.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2)
    worst = None
    for t in near:
        min_in = min(-dist(h, t) for h in near)
        max_out = max(-dist(h, t) for h in far)
        m = min_in - max_out
        worst = m if worst is None or m < worst else worst
    return {"premise_distance": 9.8, "grid_margin": f(worst)}


def main():
    rng = random.Random(20240501)
    out = {
        "rotate": [rotate_case(rng, 2, 0.5), rotate_case(rng, 2, 0.3), rotate_case(rng, 4, 0.9)],
        "loss": loss_cases(rng),
        "dbi": dbi_cases(rng),
        "optimizer": optimizer_cases(),
        "gcn": gcn_case(rng),
        "constructed": constructed_margin(),
    }
    if len(sys.argv) == 3 and sys.argv[1] == "--check":
        with open(sys.argv[2]) as fh:
            frozen = json.load(fh)
        fresh = json.loads(json.dumps(out))
        if fresh != frozen:
            print("frozen values differ from a fresh evaluation", file=sys.stderr)
            sys.exit(1)
        print("frozen values match")
        return
    print(json.dumps(out, indent=1))


if __name__ == "__main__":
    main()
