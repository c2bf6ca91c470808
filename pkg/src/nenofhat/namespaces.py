"""Namespace prefixes and the well-known vocabulary URIs used across the stack."""

from __future__ import annotations

RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS_NS = "http://www.w3.org/2000/01/rdf-schema#"
OWL_NS = "http://www.w3.org/2002/07/owl#"
XSD_NS = "http://www.w3.org/2001/XMLSchema#"
NENO_NS = "http://neno.lanl.gov#"
DEMO_NS = "http://neno.lanl.gov/demo#"

#: Namespaces whose members belong to the base vocabulary rather than to
#: compiled programs or runtime instances.
BASE_NAMESPACES = (RDF_NS, RDFS_NS, OWL_NS, XSD_NS, NENO_NS)


def in_base_namespace(uri: str) -> bool:
    return any(uri.startswith(ns) for ns in BASE_NAMESPACES)

WELL_KNOWN_PREFIXES = {
    "rdf": RDF_NS,
    "rdfs": RDFS_NS,
    "owl": OWL_NS,
    "xsd": XSD_NS,
    "neno": NENO_NS,
    "demo": DEMO_NS,
}


def _canonical(namespace: str) -> str:
    """Namespace IRIs written without a terminal separator get '#' appended."""
    if namespace.endswith("#") or namespace.endswith("/"):
        return namespace
    return namespace + "#"


class NamespaceMap:
    """Bidirectional prefix <-> namespace IRI mapping.

    Expansion of ``prefix:local`` followed by compaction is the identity for
    every registered prefix.
    """

    def __init__(self, bindings: dict[str, str] | None = None):
        self._by_prefix: dict[str, str] = {}
        for prefix, ns in (bindings or {}).items():
            self.bind(prefix, ns)

    def bind(self, prefix: str, namespace: str) -> None:
        self._by_prefix[prefix] = _canonical(namespace)

    def prefixes(self) -> dict[str, str]:
        return dict(self._by_prefix)

    def has_prefix(self, prefix: str) -> bool:
        return prefix in self._by_prefix

    def expand(self, qname: str) -> str:
        """Expand ``prefix:local`` to a full IRI; unknown prefixes raise KeyError."""
        prefix, _, local = qname.partition(":")
        return self._by_prefix[prefix] + local

    def expand_or_uri(self, text: str) -> str:
        """Expand when the text before the first ':' is a registered prefix,
        otherwise treat the text as an absolute IRI."""
        prefix, sep, _ = text.partition(":")
        if sep and prefix in self._by_prefix:
            return self.expand(text)
        return text

    def compact(self, uri: str) -> str | None:
        """Return ``prefix:local`` for the longest matching namespace, or None."""
        best: tuple[str, str] | None = None
        for prefix, ns in self._by_prefix.items():
            if uri.startswith(ns) and (best is None or len(ns) > len(best[1])):
                best = (prefix, ns)
        if best is None:
            return None
        prefix, ns = best
        return f"{prefix}:{uri[len(ns):]}"


def well_known() -> NamespaceMap:
    return NamespaceMap(WELL_KNOWN_PREFIXES)
