"""Reference implementations used only by the tests.

Each one is written the slow, obvious way and shares no code with the library.
"""

from __future__ import annotations

import itertools
import math
import random


def bfs_partition(nodes, edges):
    """Connected components by breadth-first search, as a set of frozensets."""
    adj = {n: set() for n in nodes}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen, parts = set(), set()
    for s in nodes:
        if s in seen:
            continue
        comp, frontier = {s}, [s]
        while frontier:
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if v not in comp:
                        comp.add(v)
                        nxt.append(v)
            frontier = nxt
        seen |= comp
        parts.add(frozenset(comp))
    return parts


def random_graph(rng: random.Random, max_nodes=50, p=0.1):
    n = rng.randint(1, max_nodes)
    nodes = [f"n{i:02d}" for i in range(n)]
    edges = [(a, b) for a, b in itertools.combinations(nodes, 2) if rng.random() < p]
    return nodes, edges


def bm25_by_hand(docs_tokens, query_tokens, k1=1.2, b=0.75):
    """Okapi BM25 written term by term from the closed form."""
    N = len(docs_tokens)
    avgdl = sum(len(d) for d in docs_tokens) / N
    out = []
    for d in docs_tokens:
        total = 0.0
        for term in dict.fromkeys(query_tokens):
            df = sum(1 for x in docs_tokens if term in x)
            if df == 0:
                continue
            tf = d.count(term)
            if tf == 0:
                continue
            idf = math.log(1 + (N - df + 0.5) / (df + 0.5))
            total += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(d) / avgdl))
        out.append(total)
    return out


def assemble_by_enumeration(per_subquery, k):
    """Reference top-k assembly.

    ``per_subquery`` is a list of lists of (tool_id, s_norm) in rank order;
    s_norm of the first entry is ignored. Phase one walks the top-1 picks in
    step order; phase two enumerates every tail entry, orders them by
    (s_norm desc, step asc, rank asc, id asc) and appends unseen ids.
    """
    out = []
    for ranked in per_subquery:
        if len(out) == k:
            return out
        if ranked and ranked[0][0] not in out:
            out.append(ranked[0][0])
    tail = []
    for j, ranked in enumerate(per_subquery):
        for rank, (tid, s) in enumerate(ranked, 1):
            if rank > 1:
                tail.append((-s, j, rank, tid))
    for _, _, _, tid in sorted(tail):
        if len(out) == k:
            break
        if tid not in out:
            out.append(tid)
    return out


def csr_recount(selections, gold):
    hits = 0
    for qid, g in gold.items():
        s = selections[qid]
        if sorted(set(s)) == sorted(set(g)):
            hits += 1
    return hits / len(gold)


def recall_recount(retrieved, gold, k=None):
    total = 0.0
    for qid, g in gold.items():
        r = retrieved[qid] if k is None else retrieved[qid][:k]
        total += len([t for t in set(g) if t in r]) / len(set(g))
    return total / len(gold)
