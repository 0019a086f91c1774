"""Independent brute-force oracles shared between test modules."""

from itertools import combinations

from foilfem.circuit import _effective_kinds


def brute_force_li_bonds(net, field_classes=None):
    """Enumerate every subset of inductive/current-source branches and keep
    the minimal cuts (bonds): removal splits the circuit graph into exactly
    two components with every removed branch crossing between them."""
    kinds = _effective_kinds(net, field_classes)
    li = [b for b in net.branches if kinds[b.name] in ("L", "I")]
    all_nodes = ["0", *net.nodes]

    def components(removed):
        adj = {n: set() for n in all_nodes}
        for b in net.branches:
            if b.name in removed:
                continue
            adj[b.node_pos].add(b.node_neg)
            adj[b.node_neg].add(b.node_pos)
        comp = {}
        cid = 0
        for start in all_nodes:
            if start in comp:
                continue
            stack = [start]
            comp[start] = cid
            while stack:
                for nb in adj[stack.pop()]:
                    if nb not in comp:
                        comp[nb] = cid
                        stack.append(nb)
            cid += 1
        return comp, cid

    bonds = set()
    for size in range(1, len(li) + 1):
        for combo in combinations(li, size):
            removed = {b.name for b in combo}
            comp, ncomp = components(removed)
            if ncomp != 2:
                continue
            if all(comp[b.node_pos] != comp[b.node_neg] for b in combo):
                bonds.add(frozenset(removed))
    return bonds
