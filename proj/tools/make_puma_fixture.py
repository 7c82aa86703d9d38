#!/usr/bin/env python3
"""Generate the 55-zone city fixture under data/puma/.

The fixture is synthetic: 55 zones grouped into five boroughs
(10 Manhattan, 10 Bronx, 18 Brooklyn, 14 Queens, 3 Staten Island),
123 bidirectional segments from a pruned Delaunay triangulation, and five
gravity-model demand patterns standing in for survey-derived prior means.

Correlated-flow clusters group the 300 largest flows of each pattern by the
borough pair they connect, with Manhattan and Bronx merged and every flow
touching Staten Island pooled into one cluster (7 clusters).

Usage: python3 tools/make_puma_fixture.py [out_dir]
"""
import json
import math
import sys
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

SEED = 20230515
TARGET_SEGMENTS = 123
CORRELATED_FLOWS = 300
RHO = 0.5

# (name, count, center_x, center_y, spread_x, spread_y) in km
BOROUGHS = [
    ("Manhattan", 10, 0.0, 2.0, 1.2, 5.0),
    ("Bronx", 10, 4.0, 12.0, 3.0, 2.5),
    ("Brooklyn", 18, 4.0, -9.0, 4.0, 3.5),
    ("Queens", 14, 12.0, -1.0, 4.5, 4.0),
    ("StatenIsland", 3, -10.0, -15.0, 2.5, 2.5),
]


def zone_of(borough):
    if borough in ("Manhattan", "Bronx"):
        return "MB"
    if borough == "StatenIsland":
        return "SI"
    return {"Brooklyn": "BK", "Queens": "QN"}[borough]


def connected(n, edges):
    adj = [[] for _ in range(n)]
    for p, q in edges:
        adj[p].append(q)
        adj[q].append(p)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n


def build_nodes(rng):
    nodes = []
    for name, count, cx, cy, sx, sy in BOROUGHS:
        # stratified placement on a jittered ellipse-filling lattice
        k = 0
        while k < count:
            x = cx + rng.uniform(-sx, sx)
            y = cy + rng.uniform(-sy, sy)
            if ((x - cx) / sx) ** 2 + ((y - cy) / sy) ** 2 > 1.0:
                continue
            if any(math.hypot(x - n["x"], y - n["y"]) < 0.9 for n in nodes):
                continue
            nodes.append({"id": len(nodes), "x": round(x, 3), "y": round(y, 3),
                          "borough": name})
            k += 1
    return nodes


def build_segments(nodes):
    pts = np.array([[n["x"], n["y"]] for n in nodes])
    tri = Delaunay(pts)
    edges = set()
    for s in tri.simplices:
        for a in range(3):
            p, q = sorted((int(s[a]), int(s[(a + 1) % 3])))
            edges.add((p, q))
    length = {e: float(np.linalg.norm(pts[e[0]] - pts[e[1]])) for e in edges}
    for e in sorted(edges, key=lambda e: -length[e]):
        if len(edges) == TARGET_SEGMENTS:
            break
        trial = edges - {e}
        if connected(len(nodes), trial):
            edges = trial
    assert len(edges) == TARGET_SEGMENTS, len(edges)
    return sorted(edges)


def gravity_pattern(nodes, rng):
    n = len(nodes)
    production = rng.lognormal(0.0, 0.5, n)
    attraction = rng.lognormal(0.0, 0.5, n)
    for i, nd in enumerate(nodes):
        if nd["borough"] == "Manhattan":
            attraction[i] *= 3.0
    flows = []
    for i in range(n):
        for j in range(i + 1, n):
            d = math.hypot(nodes[i]["x"] - nodes[j]["x"], nodes[i]["y"] - nodes[j]["y"])
            d = max(d, 1.0)
            flows.append([i, j, (production[i] * attraction[j] + production[j] * attraction[i]) / d ** 2])
    total = sum(f[2] for f in flows)
    scale = 3.0e7 / total
    return [[i, j, round(m * scale, 1)] for i, j, m in flows]


def clusters_for(nodes, flows):
    top = sorted(flows, key=lambda f: (-f[2], f[0], f[1]))[:CORRELATED_FLOWS]
    groups = {}
    for i, j, _ in top:
        zi, zj = zone_of(nodes[i]["borough"]), zone_of(nodes[j]["borough"])
        key = "SI" if "SI" in (zi, zj) else "-".join(sorted((zi, zj)))
        groups.setdefault(key, []).append([i, j])
    return {"clusters": [{"name": k, "rho": RHO, "pairs": sorted(v)}
                         for k, v in sorted(groups.items())]}


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data" / "puma"
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(SEED)
    nodes = build_nodes(rng)
    segments = build_segments(nodes)
    with open(out / "network.json", "w") as fh:
        json.dump({"nodes": nodes, "segments": [list(s) for s in segments]}, fh, indent=1)
    for k in range(1, 6):
        flows = gravity_pattern(nodes, rng)
        with open(out / f"prior_pattern{k}.json", "w") as fh:
            json.dump({"flows": flows}, fh)
        with open(out / f"clusters_pattern{k}.json", "w") as fh:
            json.dump(clusters_for(nodes, flows), fh, indent=1)


if __name__ == "__main__":
    main()
