"""Graph equality modulo a bijection over urn:uuid: URIs, and the
object-level filter used to compare interpreter runs.

Color refinement over node neighborhoods narrows the candidate sets, then a
backtracking search settles the bijection; all non-UUID terms must match
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

from .api import ApiIndex, RDF
from .namespaces import in_base_namespace
from .rdf import Graph, Term, Triple, is_uuid_uri


@dataclass
class IsoReport:
    verdict: bool
    mapping: dict[Term, Term] | None = None
    counterexample: Triple | None = None


def _node_key(term: Term) -> Term | str:
    """UUID nodes are anonymous for signature purposes."""
    return "*" if is_uuid_uri(term) else term


def _initial_colors(g: Graph) -> dict[Term, tuple]:
    colors: dict[Term, list] = {}
    for t in g:
        for node in (t.subject, t.object):
            if is_uuid_uri(node):
                colors.setdefault(node, [])
    for t in g:
        s_uuid = is_uuid_uri(t.subject)
        o_uuid = is_uuid_uri(t.object)
        if s_uuid:
            colors[t.subject].append(("out", _node_key(t.predicate), _node_key(t.object)))
        if o_uuid:
            colors[t.object].append(("in", _node_key(t.predicate), _node_key(t.subject)))
    return {node: tuple(sorted(map(repr, sig))) for node, sig in colors.items()}


def _refine(g: Graph, colors: dict[Term, tuple], rounds: int = 4) -> dict[Term, tuple]:
    for _ in range(rounds):
        nxt: dict[Term, list] = {node: [color] for node, color in colors.items()}
        for t in g:
            s_uuid = is_uuid_uri(t.subject)
            o_uuid = is_uuid_uri(t.object)
            if s_uuid:
                other = colors.get(t.object, _node_key(t.object))
                nxt[t.subject].append(("out", _node_key(t.predicate), other))
            if o_uuid:
                other = colors.get(t.subject, _node_key(t.subject))
                nxt[t.object].append(("in", _node_key(t.predicate), other))
        new_colors = {node: tuple(sorted(map(repr, sig))) for node, sig in nxt.items()}
        if len(set(new_colors.values())) == len(set(colors.values())):
            return new_colors
        colors = new_colors
    return colors


def _apply(mapping: dict[Term, Term], term: Term) -> Term:
    return mapping.get(term, term)


def graph_iso_mod_uuid(g1: Graph, g2: Graph) -> IsoReport:
    """Does a bijection over urn:uuid: URIs map g1 exactly onto g2?"""
    t1, t2 = set(g1), set(g2)
    if len(t1) != len(t2):
        extra = next(iter(t1 - t2), None) or next(iter(t2 - t1), None)
        return IsoReport(False, counterexample=extra)
    # triples with no uuid endpoint must match outright
    fixed1 = {t for t in t1 if not (is_uuid_uri(t.subject) or is_uuid_uri(t.object))}
    fixed2 = {t for t in t2 if not (is_uuid_uri(t.subject) or is_uuid_uri(t.object))}
    if fixed1 != fixed2:
        bad = next(iter(fixed1 ^ fixed2))
        return IsoReport(False, counterexample=bad)

    c1 = _refine(g1, _initial_colors(g1))
    c2 = _refine(g2, _initial_colors(g2))
    by_color_1: dict[tuple, list[Term]] = {}
    by_color_2: dict[tuple, list[Term]] = {}
    for node, color in c1.items():
        by_color_1.setdefault(color, []).append(node)
    for node, color in c2.items():
        by_color_2.setdefault(color, []).append(node)
    if set(by_color_1) != set(by_color_2) or any(
        len(by_color_1[c]) != len(by_color_2[c]) for c in by_color_1
    ):
        return IsoReport(False, counterexample=next(iter(t1 - fixed1), None))

    # smallest color classes first keeps the branching factor down
    nodes1 = [n for c in sorted(by_color_1, key=lambda c: len(by_color_1[c]))
              for n in sorted(by_color_1[c], key=Term.sort_key)]
    adjacency: dict[Term, list[Triple]] = {}
    for t in t1:
        if is_uuid_uri(t.subject):
            adjacency.setdefault(t.subject, []).append(t)
        if is_uuid_uri(t.object) and t.object != t.subject:
            adjacency.setdefault(t.object, []).append(t)

    mapping: dict[Term, Term] = {}
    used: set[Term] = set()

    def consistent(node: Term) -> bool:
        """Check every triple on node whose other endpoints are settled."""
        for t in adjacency.get(node, ()):  # noqa: B905
            s_ok = not is_uuid_uri(t.subject) or t.subject in mapping
            o_ok = not is_uuid_uri(t.object) or t.object in mapping
            if s_ok and o_ok:
                image = Triple(_apply(mapping, t.subject), t.predicate,
                               _apply(mapping, t.object))
                if image not in t2:
                    return False
        return True

    def search(i: int) -> bool:
        if i == len(nodes1):
            return True
        node = nodes1[i]
        for candidate in sorted(by_color_2[c1[node]], key=Term.sort_key):
            if candidate in used:
                continue
            mapping[node] = candidate
            used.add(candidate)
            if consistent(node) and search(i + 1):
                return True
            del mapping[node]
            used.discard(candidate)
        return False

    if search(0):
        return IsoReport(True, mapping=dict(mapping))
    return IsoReport(False, counterexample=next(iter(t1 - fixed1), None))


def object_level(g: Graph) -> Graph:
    """The triples describing program objects: their types and their field
    values. Machine state, triple-code, and the ontology are excluded."""
    index = ApiIndex(g.match)
    user_classes = set(index.user_classes())
    objects = {
        t.subject
        for t in g.match(None, RDF.TYPE, None)
        if t.object in user_classes and is_uuid_uri(t.subject)
    }
    out = Graph()
    for t in g:
        if t.subject not in objects:
            continue
        if t.predicate == RDF.TYPE:
            if t.object in user_classes:
                out.add(t)
        elif not in_base_namespace(t.predicate.text):
            out.add(t)
    return out


def object_graph_iso(g1: Graph, g2: Graph) -> IsoReport:
    """Isomorphism-mod-UUID over the object-level restrictions of two graphs."""
    return graph_iso_mod_uuid(object_level(g1), object_level(g2))
