"""Independent brute-force evaluators used as test oracles.

Costs are rebuilt from raw scenario fields for batches of strategies, without
going through the package's cost or kernel code.
"""

import itertools

import numpy as np


def _transit_wait(net, f):
    """(G, M, M) average transit wait by enumerating routes; f is (G, L)."""
    ids = [ln.id for ln in net.lines]
    m = net.n_zones
    out = np.zeros((f.shape[0], m, m))
    for (i, j), rs in net.route_sets.items():
        tot = 0.0
        for route in rs.routes:
            tot = tot + sum(1.0 / f[:, ids.index(lid)] for lid in route)
        out[:, i, j] = tot / rs.count
    return out


def batch_costs(s, b, r, n, r_p, f, subsidy=0.0):
    """(G, M, M, K, 6) generalized costs for G strategy pairs."""
    net, beh = s.network, s.behavior
    m, k = s.n_zones, s.n_classes
    b, r, n = np.atleast_1d(b), np.atleast_2d(r), np.atleast_2d(n)
    r_p, f = np.atleast_1d(r_p), np.atleast_2d(f)
    g = max(len(b), len(r), len(n), len(r_p), len(f))
    b, r_p = np.broadcast_to(b, (g,)), np.broadcast_to(r_p, (g,))
    r, n, f = np.broadcast_to(r, (g, m)), np.broadcast_to(n, (g, m)), np.broadcast_to(f, (g, f.shape[1]))
    wa = np.array([z.matching_scale for z in net.zones]) / np.sqrt(n)
    wp = _transit_wait(net, f)
    d = np.array([z.firstmile_distance for z in net.zones])
    u = np.array([float(z.is_underserved) for z in net.zones])
    out = np.zeros((g, m, m, k, 6))
    for i, j, c in itertools.product(range(m), range(m), range(k)):
        cl = beh.classes[c]
        al, be, ga, th = cl.alpha, cl.beta, cl.gamma, cl.theta
        la, lp = net.road_distance[i, j], net.transit_distance[i, j]
        w = wp[:, i, j]
        out[:, i, j, c, 0] = al * wa[:, i] + be * la / beh.v_a + ga * (b + r[:, i] * la)
        out[:, i, j, c, 1] = al * w + be * lp / beh.v_p + ga * r_p * lp + th * (d[i] + d[j]) / beh.v_w
        out[:, i, j, c, 2] = (al * (wa[:, i] + w) + be * (d[i] / beh.v_a + lp / beh.v_p)
                              + ga * (b + r[:, i] * d[i] + r_p * lp - subsidy * u[i]) + th * d[j] / beh.v_w)
        out[:, i, j, c, 3] = (al * (w + wa[:, j]) + be * (lp / beh.v_p + d[j] / beh.v_a)
                              + ga * (b + r[:, j] * d[j] + r_p * lp - subsidy * u[j]) + th * d[i] / beh.v_w)
        out[:, i, j, c, 4] = (al * (wa[:, i] + w + wa[:, j]) + be * (d[i] / beh.v_a + lp / beh.v_p + d[j] / beh.v_a)
                              + ga * (2 * b + r[:, i] * d[i] + r[:, j] * d[j] + r_p * lp - subsidy * (u[i] + u[j])))
        out[:, i, j, c, 5] = beh.outside_cost[i, j, c]
    return out, wa, d


def batch_demand(s, costs):
    z = -s.behavior.epsilon * costs
    z -= z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return s.demand0[None, ..., None] * e / e.sum(axis=-1, keepdims=True)


def tnc_profit_oracle(s, b, r, n, transit, dests=None):
    """Platform profit for G TNC strategies against one transit strategy.

    ``dests`` restricts the sum to trips ending in those zones and charges the
    matching share of idle-vehicle cost (the destination-relaxed cell objective).
    """
    costs, wa, d = batch_costs(s, b, r, n, transit.r_p, transit.f[None, :])
    lam = batch_demand(s, costs)
    net = s.network
    m = s.n_zones
    g = costs.shape[0]
    b = np.broadcast_to(np.atleast_1d(b), (g,))
    r = np.broadcast_to(np.atleast_2d(r), (g, m))
    n = np.broadcast_to(np.atleast_2d(n), (g, m))
    rev = np.zeros(g)
    dests = range(m) if dests is None else sorted(dests)
    fleet = n.sum(axis=1) * (len(dests) / m)
    for i, j in itertools.product(range(m), dests):
        la = net.road_distance[i, j]
        lij = lam[:, i, j].sum(axis=1)  # (G, 6)
        rev += lij[:, 0] * (b + r[:, i] * la)
        rev += lij[:, 2] * (b + r[:, i] * d[i]) + lij[:, 3] * (b + r[:, j] * d[j])
        rev += lij[:, 4] * (2 * b + r[:, i] * d[i] + r[:, j] * d[j])
        v = s.behavior.v_a
        fleet += lij[:, 0] * (wa[:, i] + la / v) + lij[:, 2] * (wa[:, i] + d[i] / v)
        fleet += lij[:, 3] * (wa[:, j] + d[j] / v) + lij[:, 4] * (wa[:, i] + wa[:, j] + (d[i] + d[j]) / v)
    return rev - s.c_av * fleet


def transit_oracle(s, tnc, r_p, f):
    """(ridership, profit) for G transit strategies against one TNC strategy."""
    costs, _, _ = batch_costs(s, tnc.b, tnc.r[None, :], tnc.n_idle[None, :], r_p, f)
    lam = batch_demand(s, costs)
    riders = lam[..., 1:5].sum(axis=(-1, -2))  # (G, M, M)
    r_p = np.broadcast_to(np.atleast_1d(r_p), (riders.shape[0],))
    f = np.broadcast_to(np.atleast_2d(f), (riders.shape[0], s.network.n_lines))
    profit = r_p * np.sum(riders * s.network.transit_distance, axis=(1, 2)) - f @ s.network.line_cost
    return riders.sum(axis=(1, 2)), profit


def tnc_dense_grid(s, transit, dests=None, nb=16, nr=11, nn=12):
    """Max of the oracle profit over a full 5-variable grid for a 2-zone instance."""
    b = np.linspace(0.0, 15.0, nb)
    r = np.linspace(0.0, 4.0, nr)
    n = np.geomspace(0.5, 40.0, nn)
    B, R1, R2, N1, N2 = (x.ravel() for x in np.meshgrid(b, r, r, n, n, indexing="ij"))
    best, arg = -np.inf, None
    for sl in np.array_split(np.arange(B.size), 8):
        v = tnc_profit_oracle(s, B[sl], np.stack([R1[sl], R2[sl]], 1), np.stack([N1[sl], N2[sl]], 1), transit, dests)
        k = int(np.argmax(v))
        if v[k] > best:
            best, arg = float(v[k]), (B[sl][k], R1[sl][k], R2[sl][k], N1[sl][k], N2[sl][k])
    return best, arg


def transit_dense_grid(s, tnc, r_values=None, n_r=61, n_f=41):
    """Best feasible ridership over a fare x frequency grid (wait caps and profit floor enforced)."""
    r = np.linspace(0.0, s.r_p_max, n_r) if r_values is None else np.atleast_1d(np.asarray(r_values, dtype=float))
    lo, hi = s.network.f_bounds
    axes = [np.geomspace(lo[l], hi[l], n_f) for l in range(s.network.n_lines)]
    mesh = np.meshgrid(r, *axes, indexing="ij")
    R = mesh[0].ravel()
    F = np.stack([m.ravel() for m in mesh[1:]], axis=1)
    best = -np.inf
    for sl in np.array_split(np.arange(R.size), max(1, R.size // 20000)):
        ride, prof = transit_oracle(s, tnc, R[sl], F[sl])
        waits = _transit_wait(s.network, F[sl])
        ok = (prof >= s.pi_0) & np.all(waits <= s.w_p_max, axis=(1, 2))
        if ok.any():
            best = max(best, float(ride[ok].max()))
    return best
