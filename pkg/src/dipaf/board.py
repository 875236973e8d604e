"""Board graphs: the map-definition format, its invariants, and lookups.

A map document is plain text split into bracketed sections.  See
``docs/map_format.md`` for the grammar.  Split coasts are fleet-only
sub-nodes written ``PROV/XC``; armies and occupancy always use the bare
province id.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from importlib import resources
from pathlib import Path

ARMY = "army"
FLEET = "fleet"
KIND_LETTER = {ARMY: "A", FLEET: "F"}
LETTER_KIND = {"A": ARMY, "F": FLEET}

LAND, WATER, COAST = "land", "water", "coast"
TERRAINS = (LAND, WATER, COAST)

BUNDLED_MAPS = ("standard", "mini3", "mini5", "ring7")


class MapError(ValueError):
    """Base class for map-definition problems."""


class MapSyntaxError(MapError):
    def __init__(self, message: str, line: int | None = None, source: str = "<map>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


class MapInvariantError(MapError):
    pass


@dataclass(frozen=True)
class ProvinceSpec:
    id: str
    long_name: str
    terrain: str
    is_supply_center: bool = False
    home_of: str | None = None
    army_adjacent: tuple[str, ...] = ()
    fleet_adjacent: tuple[str, ...] = ()
    coasts: tuple[str, ...] = ()


def province_of(node: str) -> str:
    return node.split("/", 1)[0]


@dataclass(frozen=True, eq=False)
class MapSpec:
    name: str
    provinces: tuple[ProvinceSpec, ...]
    powers: tuple[str, ...]
    start_units: dict[str, tuple[tuple[str, str], ...]]
    start_sc_owner: dict[str, str | None]
    coast_names: dict[str, str] = field(default_factory=dict)
    fleet_edges: dict[str, tuple[str, ...]] = field(default_factory=dict)
    start_year: int = 1901
    threshold: int | None = None

    def __repr__(self):
        return f"MapSpec({self.name!r}, {len(self.provinces)} provinces, {len(self.powers)} powers)"

    @cached_property
    def by_id(self) -> dict[str, ProvinceSpec]:
        return {p.id: p for p in self.provinces}

    def province(self, pid: str) -> ProvinceSpec:
        return self.by_id[province_of(pid)]

    @cached_property
    def nodes(self) -> tuple[str, ...]:
        out = [p.id for p in self.provinces]
        out.extend(self.coast_names)
        return tuple(sorted(out))

    @cached_property
    def army_adj(self) -> dict[str, tuple[str, ...]]:
        return {p.id: p.army_adjacent for p in self.provinces}

    @property
    def fleet_adj(self) -> dict[str, tuple[str, ...]]:
        return self.fleet_edges

    def adjacent(self, kind: str, node: str) -> tuple[str, ...]:
        if kind == ARMY:
            return self.army_adj.get(node, ())
        return self.fleet_edges.get(node, ())

    def can_occupy(self, kind: str, node: str) -> bool:
        prov = self.by_id.get(province_of(node))
        if prov is None:
            return False
        if kind == ARMY:
            return "/" not in node and prov.terrain != WATER
        if prov.terrain == LAND:
            return False
        if prov.coasts:
            return node in prov.coasts
        return "/" not in node

    def fleet_nodes(self, pid: str) -> tuple[str, ...]:
        prov = self.by_id[pid]
        if prov.terrain == LAND:
            return ()
        return prov.coasts or (pid,)

    def reachable_provinces(self, kind: str, node: str) -> frozenset[str]:
        return frozenset(province_of(n) for n in self.adjacent(kind, node))

    @cached_property
    def supply_centers(self) -> tuple[str, ...]:
        return tuple(sorted(p.id for p in self.provinces if p.is_supply_center))

    @cached_property
    def homes(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {pw: [] for pw in self.powers}
        for p in self.provinces:
            if p.home_of:
                out[p.home_of].append(p.id)
        return {k: tuple(sorted(v)) for k, v in out.items()}

    @property
    def win_threshold(self) -> int:
        if self.threshold is not None:
            return self.threshold
        return len(self.supply_centers) // 2 + 1

    def display(self, node: str) -> str:
        """Long form of a node, e.g. ``St. Petersburg's North Coast``."""
        prov = self.province(node)
        if "/" in node:
            return f"{prov.long_name}'s {self.coast_names[node]} Coast"
        return prov.long_name

    @cached_property
    def name_index(self) -> dict[str, str]:
        """Lower-cased surface form -> node id (long names and ids)."""
        idx: dict[str, str] = {}
        for node in self.nodes:
            idx[node.lower()] = node
            idx[self.display(node).lower()] = node
        return idx

    @cached_property
    def _province_graph(self) -> dict[str, set[str]]:
        g: dict[str, set[str]] = {p.id: set(p.army_adjacent) for p in self.provinces}
        for node, nbrs in self.fleet_edges.items():
            g[province_of(node)].update(province_of(n) for n in nbrs)
        return g

    @cached_property
    def province_distance(self) -> dict[str, dict[str, int]]:
        """Kind-agnostic shortest hop counts between provinces."""
        return {p: _bfs(self._province_graph, p) for p in self._province_graph}

    @cached_property
    def kind_distance(self) -> dict[str, dict[str, dict[str, int]]]:
        """Per unit kind: node -> province -> hops, following that kind's edges."""
        out = {}
        for kind in (ARMY, FLEET):
            graph = self.army_adj if kind == ARMY else self.fleet_edges
            table = {}
            for node in graph:
                hops = _bfs(graph, node)
                best: dict[str, int] = {}
                for n, h in hops.items():
                    p = province_of(n)
                    if h < best.get(p, 1 << 30):
                        best[p] = h
                table[node] = best
            out[kind] = table
        return out


def _bfs(graph, start) -> dict:
    dist = {start: 0}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for nxt in graph.get(cur, ()):
            if nxt not in dist:
                dist[nxt] = dist[cur] + 1
                queue.append(nxt)
    return dist


_SECTION = re.compile(r"^\[(\w+)\]$")
_KNOWN_SECTIONS = {"map", "powers", "provinces", "coasts", "army", "fleet", "starts", "owners"}


def parse_map(text: str, source: str = "<map>") -> MapSpec:
    """Parse a map document into a validated :class:`MapSpec`."""
    sections: dict[str, list[tuple[int, str]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            current = m.group(1).lower()
            if current not in _KNOWN_SECTIONS:
                raise MapSyntaxError(f"unknown section [{current}]", lineno, source)
            if current in sections:
                raise MapSyntaxError(f"duplicate section [{current}]", lineno, source)
            sections[current] = []
            continue
        if current is None:
            raise MapSyntaxError("content before the first section header", lineno, source)
        sections[current].append((lineno, line))

    for required in ("powers", "provinces", "army", "starts"):
        if required not in sections:
            raise MapSyntaxError(f"missing section [{required}]", None, source)

    meta = {}
    for lineno, line in sections.get("map", []):
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise MapSyntaxError("expected 'key value'", lineno, source)
        meta[parts[0]] = (lineno, parts[1])

    powers = []
    for lineno, line in sections["powers"]:
        if len(line.split()) != 1:
            raise MapSyntaxError("power names are single tokens", lineno, source)
        if line in powers:
            raise MapInvariantError(f"duplicate power {line!r}")
        powers.append(line)

    rows = {}
    for lineno, line in sections["provinces"]:
        parts = line.split(None, 4)
        if len(parts) != 5:
            raise MapSyntaxError("expected 'ID TERRAIN SC HOME LONG NAME'", lineno, source)
        pid, terrain, sc, home, long_name = parts
        if not re.fullmatch(r"[A-Z][A-Z0-9]*", pid):
            raise MapSyntaxError(f"bad province id {pid!r}", lineno, source)
        if terrain not in TERRAINS:
            raise MapSyntaxError(f"unknown terrain {terrain!r}", lineno, source)
        if sc not in ("sc", "-"):
            raise MapSyntaxError(f"supply-centre column must be 'sc' or '-', got {sc!r}", lineno, source)
        if pid in rows:
            raise MapInvariantError(f"duplicate province id {pid}")
        rows[pid] = dict(terrain=terrain, sc=sc == "sc", home=None if home == "-" else home,
                         long_name=long_name, lineno=lineno)

    coast_names: dict[str, str] = {}
    for lineno, line in sections.get("coasts", []):
        parts = line.split(None, 1)
        if len(parts) != 2 or "/" not in parts[0]:
            raise MapSyntaxError("expected 'PROV/XC Name'", lineno, source)
        node, label = parts
        base = province_of(node)
        if base not in rows:
            raise MapInvariantError(f"coast {node} references unknown province {base}")
        if rows[base]["terrain"] != COAST:
            raise MapInvariantError(f"coast {node} declared on non-coastal province {base}")
        if node in coast_names:
            raise MapInvariantError(f"duplicate coast {node}")
        coast_names[node] = label

    def adjacency(section):
        out: dict[str, tuple[str, ...]] = {}
        for lineno, line in sections.get(section, []):
            if ":" not in line:
                raise MapSyntaxError("expected 'NODE: NODE NODE ...'", lineno, source)
            head, rest = line.split(":", 1)
            head = head.strip()
            nbrs = rest.split()
            if head in out:
                raise MapInvariantError(f"[{section}] lists {head} twice")
            if len(set(nbrs)) != len(nbrs):
                raise MapInvariantError(f"[{section}] {head} repeats a neighbour")
            out[head] = tuple(nbrs)
        return out

    army_edges = adjacency("army")
    fleet_edges = adjacency("fleet")

    all_nodes = set(rows) | set(coast_names)
    for kind, edges in (("army", army_edges), ("fleet", fleet_edges)):
        for node, nbrs in edges.items():
            for n in (node, *nbrs):
                if n not in all_nodes:
                    raise MapInvariantError(f"{kind} edge {node}-{n} references unknown province {n}")

    for node, nbrs in army_edges.items():
        for n in (node, *nbrs):
            if "/" in n:
                raise MapInvariantError(f"army edge {node}-{n} uses a coast node")
            if rows[n]["terrain"] == WATER:
                raise MapInvariantError(f"army edge {node}-{n} touches water province {n}")
    split = {province_of(c) for c in coast_names}
    for node, nbrs in fleet_edges.items():
        for n in (node, *nbrs):
            base = province_of(n)
            if rows[base]["terrain"] == LAND:
                raise MapInvariantError(f"fleet edge {node}-{n} touches landlocked province {base}")
            if base in split and "/" not in n:
                raise MapInvariantError(f"fleet edge {node}-{n} must name a coast of {base}")

    for kind, edges in (("army", army_edges), ("fleet", fleet_edges)):
        for node, nbrs in edges.items():
            for n in nbrs:
                if n == node:
                    raise MapInvariantError(f"{kind} edge {node}-{n} is a self loop")
                if node not in edges.get(n, ()):
                    raise MapInvariantError(f"{kind} edge {node}-{n} is one-directional (no {n}-{node})")

    for pid, row in rows.items():
        if row["home"] is not None:
            if row["home"] not in powers:
                raise MapInvariantError(f"province {pid} is home of unknown power {row['home']}")
            if not row["sc"]:
                raise MapInvariantError(f"home province {pid} is not a supply centre")

    provinces = []
    for pid in sorted(rows):
        row = rows[pid]
        coasts = tuple(sorted(c for c in coast_names if province_of(c) == pid))
        fleet = set(fleet_edges.get(pid, ()))
        for c in coasts:
            fleet.update(fleet_edges.get(c, ()))
        provinces.append(ProvinceSpec(
            id=pid, long_name=row["long_name"], terrain=row["terrain"],
            is_supply_center=row["sc"], home_of=row["home"],
            army_adjacent=tuple(sorted(army_edges.get(pid, ()))),
            fleet_adjacent=tuple(sorted(fleet)), coasts=coasts))

    start_units: dict[str, list[tuple[str, str]]] = {p: [] for p in powers}
    for lineno, line in sections["starts"]:
        if ":" not in line:
            raise MapSyntaxError("expected 'Power: K NODE, K NODE'", lineno, source)
        power, rest = (s.strip() for s in line.split(":", 1))
        if power not in start_units:
            raise MapInvariantError(f"start units for unknown power {power}")
        for item in filter(None, (s.strip() for s in rest.split(","))):
            bits = item.split()
            if len(bits) != 2 or bits[0] not in LETTER_KIND:
                raise MapSyntaxError(f"bad start unit {item!r}", lineno, source)
            start_units[power].append((LETTER_KIND[bits[0]], bits[1]))

    owners: dict[str, str | None] = {pid: rows[pid]["home"] for pid in rows if rows[pid]["sc"]}
    for lineno, line in sections.get("owners", []):
        if ":" not in line:
            raise MapSyntaxError("expected 'PROV: Power'", lineno, source)
        pid, who = (s.strip() for s in line.split(":", 1))
        if pid not in owners:
            raise MapInvariantError(f"owner given for {pid}, which is not a supply centre")
        if who != "-" and who not in powers:
            raise MapInvariantError(f"owner of {pid} is unknown power {who}")
        owners[pid] = None if who == "-" else who

    threshold = None
    if "win_threshold" in meta:
        threshold = int(meta["win_threshold"][1])
    start_year = int(meta["start_year"][1]) if "start_year" in meta else 1901
    spec = MapSpec(
        name=meta["name"][1] if "name" in meta else Path(source).stem,
        provinces=tuple(provinces), powers=tuple(powers),
        start_units={k: tuple(v) for k, v in start_units.items()},
        start_sc_owner=dict(sorted(owners.items())),
        coast_names=dict(sorted(coast_names.items())),
        fleet_edges={k: tuple(sorted(v)) for k, v in sorted(fleet_edges.items())},
        start_year=start_year, threshold=threshold)
    validate_map(spec)
    return spec


def validate_map(spec: MapSpec) -> None:
    """Check the invariants that depend on the assembled map."""
    seen = set()
    for power, units in spec.start_units.items():
        for kind, node in units:
            if not spec.can_occupy(kind, node):
                raise MapInvariantError(f"{power} starts a {kind} on {node}, which is illegal for that kind")
            prov = province_of(node)
            if prov in seen:
                raise MapInvariantError(f"two start units in {prov}")
            seen.add(prov)
    for prov in spec.provinces:
        if prov.terrain == WATER and prov.army_adjacent:
            raise MapInvariantError(f"water province {prov.id} has army adjacency")
    n_owned = sum(1 for v in spec.start_sc_owner.values() if v is not None)
    if n_owned > len(spec.supply_centers):
        raise MapInvariantError("more owned centres than supply centres")


@lru_cache(maxsize=None)
def _bundled(name: str) -> MapSpec:
    text = resources.files("dipaf.data").joinpath(f"{name}.map").read_text(encoding="utf-8")
    return parse_map(text, f"{name}.map")


def load_map(source: str | Path) -> MapSpec:
    """Load a map by bundled name (``"standard"``), file path, or raw text."""
    if isinstance(source, str) and source in BUNDLED_MAPS:
        return _bundled(source)
    if isinstance(source, Path) or ("\n" not in str(source) and Path(source).exists()):
        path = Path(source)
        return parse_map(path.read_text(encoding="utf-8"), str(path))
    return parse_map(str(source))
