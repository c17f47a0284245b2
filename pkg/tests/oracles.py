"""Slow, independent reference implementations used only by the tests.

Nothing here imports the algorithms it checks: d-separation is decided by
enumerating paths, joints by looping over assignments, equivalence classes
by enumerating orientations.
"""

import itertools
import math

import numpy as np


def edge_list(g):
    """(u, v, head_at_u, head_at_v) for every edge of a CausalGraph."""
    out = [(u, v, False, True) for u, v in g.directed_edges]
    out += [(u, v, True, True) for u, v in g.bidirected_edges]
    return out


def reach_descendants(g, x):
    seen, stack = {x}, [x]
    while stack:
        u = stack.pop()
        for a, b in g.directed_edges:
            if a == u and b not in seen:
                seen.add(b)
                stack.append(b)
    return seen


def path_d_separated(g, xs, ys, zs):
    """True iff every simple path between xs and ys is blocked by zs."""
    xs, ys, zs = set(xs), set(ys), set(zs)
    incident = {n: [] for n in g.names}
    for u, v, hu, hv in edge_list(g):
        incident[u].append((v, hu, hv))   # stepping u -> v: head at u, head at v
        incident[v].append((u, hv, hu))
    desc_in_z = {n for n in g.names if reach_descendants(g, n) & zs}

    def open_path(node, head_in, visited):
        if node in ys:
            return True
        for nxt, head_here, head_next in incident[node]:
            if nxt in visited:
                continue
            collider = head_in and head_here
            if collider and node not in desc_in_z:
                continue
            if not collider and node in zs:
                continue
            if open_path(nxt, head_next, visited | {nxt}):
                return True
        return False

    for x in xs:
        for nxt, _, head_next in incident[x]:
            if nxt in ys:
                return False
            if open_path(nxt, head_next, {x, nxt}):
                return False
    return True


def loop_joint(m):
    """Exact joint by explicit iteration over every assignment."""
    names = list(m.order)
    shape = [m.levels(n) for n in names]
    probs = np.zeros(shape)
    for assign in itertools.product(*(range(k) for k in shape)):
        val = dict(zip(names, assign))
        p = 1.0
        for n in names:
            mech = m.mechanism(n)
            p *= mech.cpt[tuple(val[q] for q in mech.parents) + (val[n],)]
        probs[assign] = p
    return names, probs


def cmi_loop(names, probs, x, y, z):
    """Conditional mutual information I(X;Y|Z) by summing over cells."""
    keep = [x, y, *z]
    drop = tuple(i for i in range(len(names)) if names[i] not in keep)
    p = probs.sum(axis=drop)
    order = [n for n in names if n in keep]
    p = np.transpose(p, [order.index(n) for n in keep])
    total = 0.0
    for cell in itertools.product(*(range(s) for s in p.shape)):
        pxyz = p[cell]
        if pxyz <= 0:
            continue
        zc = cell[2:]
        pz = p[(slice(None), slice(None)) + zc].sum()
        pxz = p[(cell[0], slice(None)) + zc].sum()
        pyz = p[(slice(None), cell[1]) + zc].sum()
        total += pxyz * math.log(pxyz * pz / (pxz * pyz))
    return total


def dag_statements(nodes, edges):
    """All (x, y, Z) d-separation verdicts of a DAG given as an edge list."""
    from causalscope.graph import parse_graph

    g = parse_graph(", ".join(f"{u}->{v}" for u, v in edges), nodes=nodes)
    out = {}
    for x, y in itertools.combinations(sorted(nodes), 2):
        rest = [n for n in sorted(nodes) if n not in (x, y)]
        for r in range(len(rest) + 1):
            for zs in itertools.combinations(rest, r):
                out[(x, y, zs)] = path_d_separated(g, {x}, {y}, set(zs))
    return out


def is_acyclic(nodes, edges):
    indeg = {n: 0 for n in nodes}
    for _, v in edges:
        indeg[v] += 1
    ready = [n for n in nodes if indeg[n] == 0]
    seen = 0
    while ready:
        u = ready.pop()
        seen += 1
        for a, b in edges:
            if a == u:
                indeg[b] -= 1
                if indeg[b] == 0:
                    ready.append(b)
    return seen == len(nodes)


def equivalence_class_cpdag(nodes, edges):
    """Directed edges shared by every Markov-equivalent DAG, the rest undirected.

    Enumerates all orientations of the skeleton and keeps the acyclic ones
    whose full list of d-separation statements matches the original.
    """
    target = dag_statements(nodes, edges)
    skeleton = [tuple(sorted(e)) for e in edges]
    members = []
    for flips in itertools.product((False, True), repeat=len(skeleton)):
        cand = [(b, a) if f else (a, b) for (a, b), f in zip(skeleton, flips)]
        if is_acyclic(nodes, cand) and dag_statements(nodes, cand) == target:
            members.append(set(cand))
    directed = set.intersection(*members)
    undirected = {frozenset(e) for e in skeleton if e not in directed and e[::-1] not in directed}
    return frozenset(directed), frozenset(undirected)


def inverse_2x2(mat):
    (a, b), (c, d) = mat
    det = a * d - b * c
    return np.array([[d, -b], [-c, a]]) / det


def ols_normal_equations(X, y):
    return np.linalg.solve(X.T @ X, X.T @ y)
