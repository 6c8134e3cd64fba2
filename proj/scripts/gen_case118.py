#!/usr/bin/env python3
"""Generates cases/case118.m, a 118-bus benchmark in MATPOWER format.

The bus/branch topology (118 buses, 186 branches) and the load profile follow
the classic 118-bus test system. Reactances, ratings, generator capacities,
and costs are synthesized here: this repository ships no third-party data
files, so the fixture is a reconstruction intended to be structurally
realistic rather than numerically identical to any published dataset.

Ratings are sized from the network's own nominal economic dispatch flows with
a uniform margin, which makes single-line outages produce a mix of benign,
congested, and shedding scenarios across the limit-scaling factors used by
the experiment sweep.
"""

BRANCHES = [
    (1, 2), (1, 3), (4, 5), (3, 5), (5, 6), (6, 7), (8, 9), (8, 5), (9, 10),
    (4, 11), (5, 11), (11, 12), (2, 12), (3, 12), (7, 12), (11, 13), (12, 14),
    (13, 15), (14, 15), (12, 16), (15, 17), (16, 17), (17, 18), (18, 19),
    (19, 20), (15, 19), (20, 21), (21, 22), (22, 23), (23, 24), (23, 25),
    (26, 25), (25, 27), (27, 28), (28, 29), (30, 17), (8, 30), (26, 30),
    (17, 31), (29, 31), (23, 32), (31, 32), (27, 32), (15, 33), (19, 34),
    (35, 36), (35, 37), (33, 37), (34, 36), (34, 37), (38, 37), (37, 39),
    (37, 40), (30, 38), (39, 40), (40, 41), (40, 42), (41, 42), (43, 44),
    (34, 43), (44, 45), (45, 46), (46, 47), (46, 48), (47, 49), (42, 49),
    (42, 49), (45, 49), (48, 49), (49, 50), (49, 51), (51, 52), (52, 53),
    (53, 54), (49, 54), (49, 54), (54, 55), (54, 56), (55, 56), (56, 57),
    (50, 57), (56, 58), (51, 58), (54, 59), (56, 59), (56, 59), (55, 59),
    (59, 60), (59, 61), (60, 61), (60, 62), (61, 62), (63, 59), (63, 64),
    (64, 61), (38, 65), (64, 65), (49, 66), (49, 66), (62, 66), (62, 67),
    (65, 66), (66, 67), (65, 68), (47, 69), (49, 69), (68, 69), (69, 70),
    (24, 70), (70, 71), (24, 72), (71, 72), (71, 73), (70, 74), (70, 75),
    (69, 75), (74, 75), (76, 77), (69, 77), (75, 77), (77, 78), (78, 79),
    (77, 80), (77, 80), (79, 80), (68, 81), (81, 80), (77, 82), (82, 83),
    (83, 84), (83, 85), (84, 85), (85, 86), (86, 87), (85, 88), (85, 89),
    (88, 89), (89, 90), (89, 90), (90, 91), (89, 92), (89, 92), (91, 92),
    (92, 93), (92, 94), (93, 94), (94, 95), (80, 96), (82, 96), (94, 96),
    (80, 97), (80, 98), (80, 99), (92, 100), (94, 100), (95, 96), (96, 97),
    (98, 100), (99, 100), (100, 101), (92, 102), (101, 102), (100, 103),
    (100, 104), (103, 104), (103, 105), (100, 106), (104, 105), (105, 106),
    (105, 107), (105, 108), (106, 107), (108, 109), (103, 110), (109, 110),
    (110, 111), (110, 112), (17, 113), (32, 113), (32, 114), (27, 115),
    (114, 115), (68, 116), (12, 117), (75, 118), (76, 118),
]

LOAD_MW = {
    1: 51, 2: 20, 3: 39, 4: 39, 6: 52, 7: 19, 11: 70, 12: 47, 13: 34, 14: 14,
    15: 90, 16: 25, 17: 11, 18: 60, 19: 45, 20: 18, 21: 14, 22: 10, 23: 7,
    27: 71, 28: 17, 29: 24, 31: 43, 32: 59, 33: 23, 34: 59, 35: 33, 36: 31,
    39: 27, 40: 66, 41: 37, 42: 96, 43: 18, 44: 16, 45: 53, 46: 28, 47: 34,
    48: 20, 49: 87, 50: 17, 51: 17, 52: 18, 53: 23, 54: 113, 55: 63, 56: 84,
    57: 12, 58: 12, 59: 277, 60: 78, 62: 77, 66: 39, 67: 28, 70: 66, 74: 68,
    75: 47, 76: 68, 77: 61, 78: 71, 79: 39, 80: 130, 82: 54, 83: 20, 84: 11,
    85: 24, 86: 21, 88: 48, 90: 163, 92: 65, 93: 12, 94: 30, 95: 42, 96: 38,
    97: 15, 98: 34, 100: 37, 101: 22, 102: 5, 103: 23, 104: 38, 105: 31,
    106: 43, 107: 50, 108: 2, 109: 8, 110: 39, 112: 68, 113: 6, 114: 8,
    115: 22, 116: 184, 117: 20, 118: 33,
}

BIG_PMAX = {
    10: 550, 12: 185, 25: 320, 26: 414, 31: 107, 46: 119, 49: 304, 54: 148,
    59: 255, 61: 260, 65: 491, 66: 492, 69: 805, 80: 577, 87: 104, 89: 707,
    100: 352, 103: 140, 111: 136,
}

GEN_BUSES = [
    1, 4, 6, 8, 10, 12, 15, 18, 19, 24, 25, 26, 27, 31, 32, 34, 36, 40, 42,
    46, 49, 54, 55, 56, 59, 61, 62, 65, 66, 69, 70, 72, 73, 74, 76, 77, 80,
    85, 87, 89, 90, 91, 92, 99, 100, 103, 104, 105, 107, 110, 111, 112, 113,
    116,
]

TAPPED = {(8, 5): 0.985, (26, 25): 0.96}  # a couple of transformer branches
N = 118
BASE = 100.0

assert len(BRANCHES) == 186, len(BRANCHES)
assert len(GEN_BUSES) == 54

# Connectivity check.
adj = {i: set() for i in range(1, N + 1)}
for a, b in BRANCHES:
    adj[a].add(b)
    adj[b].add(a)
seen = {1}
stack = [1]
while stack:
    u = stack.pop()
    for v in adj[u]:
        if v not in seen:
            seen.add(v)
            stack.append(v)
assert len(seen) == N, f"disconnected: reached {len(seen)}"

total_load = float(sum(LOAD_MW.values()))
pmax = {g: float(BIG_PMAX.get(g, 100.0)) for g in GEN_BUSES}
total_pmax = sum(pmax.values())
# The sweep scales generation capacity by alpha; at alpha = 0.5 the halved
# capacity must still clear the load or every dispatch errors out.
assert 0.5 * total_pmax > total_load, (total_pmax, total_load)

# Nominal proportional dispatch used only to size the ratings. Values are
# written with 6 decimals; absorb the rounding drift at the reference bus so
# the case balances exactly.
pg = {g: round(total_load * pmax[g] / total_pmax, 6) for g in GEN_BUSES}
pg[69] += round(total_load - sum(pg.values()), 6)

# Deterministic synthesized reactances in a plausible per-unit band.
def synth_x(i, a, b):
    r = (a * 2654435761 + b * 40503 + i * 69069) % 1000 / 1000.0
    return 0.02 + 0.08 * r

xs = [synth_x(i, a, b) for i, (a, b) in enumerate(BRANCHES)]

# DC flows at the proportional dispatch.
import numpy as np

p = np.zeros(N)
for bus, mw in LOAD_MW.items():
    p[bus - 1] -= mw / BASE
for bus, mw in pg.items():
    p[bus - 1] += mw / BASE
assert abs(p.sum()) < 1e-9

weights = np.array([
    1.0 / xs[i] / TAPPED.get((a, b), 1.0) for i, (a, b) in enumerate(BRANCHES)
])


def line_flows(branch_mask, inj):
    """Per-branch DC flows; islanded imbalance is shared uniformly."""
    inc = np.zeros((N, len(BRANCHES)))
    for i, (a, b) in enumerate(BRANCHES):
        if not branch_mask[i]:
            continue
        inc[a - 1, i] = 1.0
        inc[b - 1, i] = -1.0
    lap = inc @ np.diag(weights) @ inc.T
    # Identify islands, rebalance each uniformly, then solve via pinv.
    comp = np.full(N, -1)
    cid = 0
    adj2 = [[] for _ in range(N)]
    for i, (a, b) in enumerate(BRANCHES):
        if branch_mask[i]:
            adj2[a - 1].append(b - 1)
            adj2[b - 1].append(a - 1)
    for s in range(N):
        if comp[s] >= 0:
            continue
        stack = [s]
        comp[s] = cid
        while stack:
            u = stack.pop()
            for v in adj2[u]:
                if comp[v] < 0:
                    comp[v] = cid
                    stack.append(v)
        cid += 1
    q = inj.copy()
    for c in range(cid):
        mask = comp == c
        q[mask] -= q[mask].sum() / mask.sum()
    theta = np.linalg.pinv(lap) @ q
    return weights * branch_mask * (inc.T @ theta)


mask_full = np.ones(len(BRANCHES), dtype=bool)
f_nom = line_flows(mask_full, p)

# The bundled partition switches six of the seven tie lines off; the sweep's
# tree-structured strategies start from that reduced topology, so ratings
# must also be sized against its outage flows.
TREE_OFF = [(15, 33), (19, 34), (69, 70), (69, 75), (69, 77), (81, 80)]
mask_tree = np.array([br not in TREE_OFF for br in BRANCHES])

# Worst post-outage flow on each surviving line over all single-line outages,
# at the nominal dispatch, for both starting topologies.
f_worst = np.abs(f_nom).copy()
for out in range(len(BRANCHES)):
    mask = mask_full.copy()
    mask[out] = False
    f_worst = np.maximum(f_worst, np.abs(line_flows(mask, p)))
f_tree_nom = line_flows(mask_tree, p)
f_worst_tree = np.abs(f_tree_nom).copy()
for out in range(len(BRANCHES)):
    if not mask_tree[out]:
        continue
    mask = mask_tree.copy()
    mask[out] = False
    f_worst_tree = np.maximum(f_worst_tree, np.abs(line_flows(mask, p)))

# Ratings: every line clears 2.2x its nominal flow (so the halved-limit
# sweep still admits a feasible dispatch) and carries deterministic per-line
# security margins against the worst single-outage flows. The mesh margin
# straddles 1.0 so a minority of lines stay outage-vulnerable at scale 1;
# the tree margin straddles 2.0 so the halved-limit tree scenarios split
# into a mix of benign and shedding contingencies.
FLOOR_MW = 40.0
rate_a = []
for i, (a, b) in enumerate(BRANCHES):
    r = (a * 9176 + b * 485863 + i * 2654435761) % 1000 / 1000.0
    sec_margin = 0.75 + 0.5 * r
    tree_margin = 0.9 + 0.45 * ((r * 7919) % 1.0)
    need = max(2.2 * abs(f_nom[i]), 2.05 * abs(f_tree_nom[i]),
               sec_margin * f_worst[i], tree_margin * f_worst_tree[i]) * BASE
    rate_a.append(max(round(need, 1), FLOOR_MW))

rows_bus = []
for bus in range(1, N + 1):
    pd = LOAD_MW.get(bus, 0)
    btype = 3 if bus == 69 else (2 if bus in GEN_BUSES else 1)
    rows_bus.append(f"  {bus} {btype} {pd} 0 0 0 1 1.0 0 138 1 1.06 0.94;")

rows_gen = []
rows_cost = []
for k, g in enumerate(GEN_BUSES):
    rows_gen.append(f"  {g} {pg[g]:.6f} 0 300 -300 1.0 100 1 {pmax[g]:.1f} 0;")
    # Quadratic coefficient inversely proportional to capacity: the
    # unconstrained economic dispatch then matches the proportional
    # dispatch the ratings were sized against.
    c2 = 50.0 / pmax[g]
    rows_cost.append(f"  2 0 0 3 {c2:.6f} 20 0;")

rows_branch = []
for i, (a, b) in enumerate(BRANCHES):
    ratio = TAPPED.get((a, b), 0)
    rows_branch.append(
        f"  {a} {b} 0.0 {xs[i]:.5f} 0.0 {rate_a[i]} 0 0 {ratio} 0 1 -360 360;")

with open("cases/case118.m", "w") as fh:
    fh.write("function mpc = case118\n")
    fh.write("% 118-bus benchmark; synthesized electrical parameters (see\n")
    fh.write("% scripts/gen_case118.py for how ratings and reactances are derived).\n")
    fh.write("mpc.version = '2';\n")
    fh.write(f"mpc.baseMVA = {BASE:.0f};\n")
    fh.write("mpc.bus = [\n" + "\n".join(rows_bus) + "\n];\n")
    fh.write("mpc.gen = [\n" + "\n".join(rows_gen) + "\n];\n")
    fh.write("mpc.branch = [\n" + "\n".join(rows_branch) + "\n];\n")
    fh.write("mpc.gencost = [\n" + "\n".join(rows_cost) + "\n];\n")

print(f"buses={N} branches={len(BRANCHES)} gens={len(GEN_BUSES)} "
      f"load={total_load:.0f} MW pmax={total_pmax:.0f} MW")
print("wrote cases/case118.m")
