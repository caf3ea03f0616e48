"""Independent reference implementations used as test oracles.

These deliberately take different computational routes than the library:
triple loops instead of BLAS, explicit dense adjacency matrices instead of
per-node gathers, exhaustive filters instead of indexed lookups, and central
finite differences instead of the tape.
"""

import numpy as np


def matmul_ref(a, b):
    """Triple-loop matrix product."""
    a, b = np.asarray(a), np.asarray(b)
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            for l in range(k):
                out[i, j] += a[i, l] * b[l, j]
    return out


def row_normalized_adjacency(g):
    """Dense in-neighbor adjacency, multiplicity counted, rows normalized.

    Row i has A[i, j] = (#edges j->i) / in-degree(i); in-degree-0 rows get
    a unit self-loop.
    """
    n = len(g.nodes)
    a = np.zeros((n, n))
    for e in g.edges:
        a[e.dst, e.src] += 1.0
    for i in range(n):
        s = a[i].sum()
        if s == 0:
            a[i, i] = 1.0
        else:
            a[i] /= s
    return a


def gcn_layer_ref(states, g, w, nonlin):
    """Dense-adjacency reference: nonlin(A_hat @ (states @ W^T))."""
    a = row_normalized_adjacency(g)
    return nonlin(a @ (np.asarray(states) @ np.asarray(w).T))


def encode_nodes_ref(g, table, w_enc, nonlin, embed_fn, node_input_fn):
    """Per-node loop reference for the initial encoding."""
    n = len(g.nodes)
    d = table.dim
    w = np.asarray(w_enc)
    out = np.zeros((n, w.shape[0]))
    for i in range(n):
        in_edges = [e for e in g.edges if e.dst == i]
        if in_edges:
            msgs = [
                w @ np.concatenate([node_input_fn(g.nodes[e.src], table),
                                    embed_fn(table, e.relation).data])
                for e in in_edges
            ]
        else:
            msgs = [w @ np.concatenate([node_input_fn(g.nodes[i], table),
                                        embed_fn(table, "self").data])]
        out[i] = nonlin(np.mean(msgs, axis=0))
    return out


def brute_force_knowledge_graph(seed_toks, triples, whitelist, vocab,
                                match_tail=False):
    """Exhaustive scan over every triple; returns (node names, edge triples)."""
    seeds = set(seed_toks)
    admitted = set()
    for rel, head, tail in triples:
        if rel not in whitelist:
            continue
        if head in seeds and tail in vocab:
            admitted.add((head, rel, tail))
        if match_tail and tail in seeds and head in vocab:
            admitted.add((head, rel, tail))
    nodes = sorted(seeds | {h for h, _, _ in admitted} | {t for _, _, t in admitted})
    edges = sorted((h, r, t) for h, r, t in admitted)
    return nodes, edges


def finite_difference(f, x, eps=1e-6):
    """Central-difference gradient of scalar f at flat array x."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = f(x)
        flat[i] = orig - eps
        down = f(x)
        flat[i] = orig
        gf[i] = (up - down) / (2 * eps)
    return g
