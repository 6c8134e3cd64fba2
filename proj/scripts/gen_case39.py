#!/usr/bin/env python3
"""Generates cases/case39.json, the bundled two-area 39-bus demonstration network.

Topology is the standard 39-bus New England test system (46 branches,
generators at buses 30-39). Electrical parameters are synthesized here rather
than copied from any particular dataset: susceptances are uniform and line
ratings are sized from the network's own nominal and post-contingency flows.

Designed-in properties, asserted below:
  * two areas: area 1 = {2, 25, 26, 28, 29, 30, 37, 38}, area 2 = the rest,
    with exactly three tie lines (1,2), (2,3), (26,27);
  * (2,3) carries the largest absolute tie flow, so the largest-flow switching
    heuristic keeps it and switches off (1,2) and (26,27);
  * on the switched (tree-connected) network, losing line (4,14) leaves all
    ratings satisfied (generation-only mitigation suffices trivially), while
    losing line (6,7) strands the bus-7 load behind an undersized line (7,8),
    which no generation-side action can fix: load shedding is required.
"""

import json
import math

BRANCHES = [
    (1, 2), (1, 39), (2, 3), (2, 25), (2, 30), (3, 4), (3, 18), (4, 5),
    (4, 14), (5, 6), (5, 8), (6, 7), (6, 11), (6, 31), (7, 8), (8, 9),
    (9, 39), (10, 11), (10, 13), (10, 32), (11, 12), (12, 13), (13, 14),
    (14, 15), (15, 16), (16, 17), (16, 19), (16, 21), (16, 24), (17, 18),
    (17, 27), (19, 20), (19, 33), (20, 34), (21, 22), (22, 23), (22, 35),
    (23, 24), (23, 36), (25, 26), (25, 37), (26, 27), (26, 28), (26, 29),
    (28, 29), (29, 38),
]

LOAD_MW = {
    3: 322.0, 4: 500.0, 7: 233.8, 8: 522.0, 12: 8.5, 15: 320.0, 16: 329.0,
    18: 158.0, 20: 680.0, 21: 274.0, 23: 247.5, 24: 308.6, 25: 224.0,
    26: 139.0, 27: 281.0, 28: 206.0, 29: 283.5, 31: 9.2, 39: 1104.0,
}

GEN_MW = {
    30: 250.0, 31: 0.0, 32: 650.0, 33: 632.0, 34: 508.0, 35: 650.0,
    36: 560.0, 37: 540.0, 38: 830.0, 39: 1300.0,
}

AREA1 = {2, 25, 26, 28, 29, 30, 37, 38}
SWITCHED_OFF = [(1, 2), (26, 27)]
BASE = 100.0

# Balance on bus 31 (the conventional slack).
GEN_MW[31] = sum(LOAD_MW.values()) - sum(v for k, v in GEN_MW.items() if k != 31)
assert GEN_MW[31] > 0

N = 39


def flows(branches, p):
    """DC flows with unit susceptances via the pseudo-inverse Laplacian."""
    lap = [[0.0] * N for _ in range(N)]
    for a, b in branches:
        a -= 1
        b -= 1
        lap[a][a] += 1.0
        lap[b][b] += 1.0
        lap[a][b] -= 1.0
        lap[b][a] -= 1.0
    # Solve grounded system (drop node 0), theta_0 = 0.
    import copy
    m = copy.deepcopy(lap)
    rhs = list(p)
    idx = list(range(1, N))
    a = [[m[i][j] for j in idx] for i in idx]
    b = [rhs[i] for i in idx]
    n = len(idx)
    for col in range(n):  # Gaussian elimination with partial pivoting
        piv = max(range(col, n), key=lambda r: abs(a[r][col]))
        a[col], a[piv] = a[piv], a[col]
        b[col], b[piv] = b[piv], b[col]
        for r in range(col + 1, n):
            f = a[r][col] / a[col][col]
            for c in range(col, n):
                a[r][c] -= f * a[col][c]
            b[r] -= f * b[col]
    theta = [0.0] * n
    for r in range(n - 1, -1, -1):
        s = b[r] - sum(a[r][c] * theta[c] for c in range(r + 1, n))
        theta[r] = s / a[r][r]
    th = [0.0] + theta
    return {(x, y): th[x - 1] - th[y - 1] for x, y in branches}


p = [0.0] * N
for bus, mw in LOAD_MW.items():
    p[bus - 1] -= mw / BASE
for bus, mw in GEN_MW.items():
    p[bus - 1] += mw / BASE
assert abs(sum(p)) < 1e-9

f_full = flows(BRANCHES, p)

# Tie ordering on the full network: (2,3) must dominate.
ties = [(1, 2), (2, 3), (26, 27)]
tie_abs = {t: abs(f_full[t]) for t in ties}
assert tie_abs[(2, 3)] == max(tie_abs.values()), tie_abs

tree = [b for b in BRANCHES if b not in SWITCHED_OFF]
f_tree = flows(tree, p)
f_no414 = flows([b for b in tree if b != (4, 14)], p)
f_no67 = flows([b for b in tree if b != (6, 7)], p)

# Stranded bus-7 load when (6,7) is out: line (7,8) must carry it all.
assert abs(f_no67[(7, 8)] + LOAD_MW[7] / BASE) < 1e-9

limits = {}
for br in BRANCHES:
    worst = max(abs(f_full[br]), abs(f_tree.get(br, 0.0)),
                abs(f_no414.get(br, 0.0)) if br != (4, 14) else 0.0)
    limits[br] = round(1.25 * worst + 0.10, 4)

# Undersize (7,8): fine at nominal and under the (4,14) outage, impossible
# under the (6,7) outage (needs 2.338 pu).
need_67 = abs(f_no67[(7, 8)])
assert limits[(7, 8)] < need_67, (limits[(7, 8)], need_67)

# Every other rating must clear the (6,7) contingency once ~0.4 pu at bus 7
# is shed; give those lines headroom against the raw (6,7) reroute too.
for br in BRANCHES:
    if br in ((7, 8), (6, 7)):
        continue
    limits[br] = max(limits[br], round(1.25 * abs(f_no67.get(br, 0.0)) + 0.10, 4))

buses = []
for bus in range(1, N + 1):
    # Well-damped machine/load dynamics: the post-failure flow transition is
    # then close to monotone, so transient line loadings stay near the static
    # post-failure values and the congestion-price detector is not tripped by
    # pure swing overshoot on benign failures.
    entry = {"id": bus, "inertia": 0.2, "damping": 1.0}
    if bus in LOAD_MW:
        entry["demand"] = round(LOAD_MW[bus] / BASE, 6)
    if bus in GEN_MW:
        g = GEN_MW[bus] / BASE
        entry["gen"] = round(g, 6)
        entry["gen_min"] = 0.0
        entry["gen_max"] = round(g + 2.0, 6)
    entry["area"] = 1 if bus in AREA1 else 2
    buses.append(entry)

lines = [
    {"from": a, "to": b, "susceptance": 1.0, "limit": limits[(a, b)]}
    for a, b in BRANCHES
]

doc = {
    "schema_version": 1,
    "base_mva": BASE,
    "name": "case39",
    "buses": buses,
    "lines": lines,
    "partition": {
        "area_of": {str(bus): (1 if bus in AREA1 else 2) for bus in range(1, N + 1)},
        "switched_off": [list(t) for t in SWITCHED_OFF],
    },
}

with open("cases/case39.json", "w") as fh:
    json.dump(doc, fh, indent=2)
    fh.write("\n")

print("tie flows (full):", {t: round(f_full[t], 4) for t in ties})
print("limit(7,8) =", limits[(7, 8)], " needed under (6,7) outage:", round(need_67, 4))
print("wrote cases/case39.json")
