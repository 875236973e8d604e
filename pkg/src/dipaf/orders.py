"""Orders, joint actions, and the two text dialects.

Short dialect is conventional notation (``F MAO - POR``, ``A PAR H``,
``A MAR S A PAR - BUR``).  Verbose dialect is the prose form used in the
prompts (``fleet in Mid Atlantic Ocean moves to Portugal``).  The grammar for
both lives in ``docs/order_grammar.ebnf``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

from .board import ARMY, FLEET, KIND_LETTER, LETTER_KIND, MapSpec, province_of

HOLD = "hold"
MOVE = "move"
SUPPORT_HOLD = "support_hold"
SUPPORT_MOVE = "support_move"
RETREAT = "retreat"
DISBAND = "disband"
BUILD = "build"
WAIVE = "waive"

ORDER_TYPES = (HOLD, MOVE, SUPPORT_HOLD, SUPPORT_MOVE, RETREAT, DISBAND, BUILD, WAIVE)
MOVE_PHASE_TYPES = frozenset({HOLD, MOVE, SUPPORT_HOLD, SUPPORT_MOVE})

SHORT, VERBOSE = "short", "verbose"


class OrderError(ValueError):
    pass


class OrderParseError(OrderError):
    pass


class UnknownProvinceError(OrderParseError):
    pass


class NoSuchUnitError(OrderParseError):
    pass


@dataclass(frozen=True, order=True)
class Order:
    """One unit's command.

    ``dest`` is a node for moves, retreats and builds and a bare province
    for supported moves.  ``target`` is the supported unit's province.
    """

    type: str
    unit: str | None = None
    loc: str | None = None
    dest: str | None = None
    target: str | None = None
    target_unit: str | None = None

    def __post_init__(self):
        if self.type not in ORDER_TYPES:
            raise OrderError(f"unknown order type {self.type!r}")
        if self.type in (MOVE, RETREAT) and self.dest is not None and province_of(self.dest) == province_of(self.loc):
            raise OrderError(f"{self.type} destination equals origin {self.loc}")
        if self.type in (SUPPORT_HOLD, SUPPORT_MOVE) and self.target is not None \
                and self.target == province_of(self.loc):
            raise OrderError("a unit cannot support itself")
        if self.type == SUPPORT_MOVE and self.dest is not None and self.dest == province_of(self.loc):
            raise OrderError("a unit cannot support a move into its own province")

    @property
    def actor(self) -> tuple[str, str] | None:
        if self.type == WAIVE:
            return None
        return (self.unit, self.loc)

    @property
    def province(self) -> str | None:
        return None if self.loc is None else province_of(self.loc)

    # constructors, mostly for readability at call sites
    @classmethod
    def hold(cls, unit, loc):
        return cls(HOLD, unit, loc)

    @classmethod
    def move(cls, unit, loc, dest):
        return cls(MOVE, unit, loc, dest)

    @classmethod
    def support_hold(cls, unit, loc, target_unit, target):
        return cls(SUPPORT_HOLD, unit, loc, target=province_of(target), target_unit=target_unit)

    @classmethod
    def support_move(cls, unit, loc, target_unit, target, dest):
        return cls(SUPPORT_MOVE, unit, loc, province_of(dest), province_of(target), target_unit)

    @classmethod
    def retreat(cls, unit, loc, dest):
        return cls(RETREAT, unit, loc, dest)

    @classmethod
    def disband(cls, unit, loc):
        return cls(DISBAND, unit, loc)

    @classmethod
    def build(cls, unit, loc):
        return cls(BUILD, unit, loc)

    @classmethod
    def waive(cls):
        return cls(WAIVE)

    def __str__(self):
        return render_short(self)


def canonical_key(order: Order):
    if order.loc is None:
        return ("~", "")
    return (province_of(order.loc), order.loc)


@dataclass(frozen=True)
class JointAction:
    """One power's orders, one per unit, in canonical (province id) order."""

    power: str
    orders: tuple[Order, ...]

    def __post_init__(self):
        actors = [o.province for o in self.orders if o.type != WAIVE]
        if len(set(actors)) != len(actors):
            raise OrderError(f"duplicate actor in joint action for {self.power}")
        ordered = tuple(sorted(self.orders, key=canonical_key))
        object.__setattr__(self, "orders", ordered)

    def __len__(self):
        return len(self.orders)

    def __iter__(self):
        return iter(self.orders)

    def key(self) -> tuple[str, ...]:
        return tuple(render_short(o) for o in self.orders)

    def text(self, dialect: str = SHORT, spec: MapSpec | None = None) -> str:
        return ", ".join(render_order(o, dialect, spec) for o in self.orders)


# ---------------------------------------------------------------- rendering

def render_short(order: Order) -> str:
    t = order.type
    if t == WAIVE:
        return "WAIVE"
    head = f"{KIND_LETTER[order.unit]} {order.loc}"
    if t == HOLD:
        return f"{head} H"
    if t == MOVE:
        return f"{head} - {order.dest}"
    if t == SUPPORT_HOLD:
        return f"{head} S {KIND_LETTER[order.target_unit]} {order.target}"
    if t == SUPPORT_MOVE:
        return f"{head} S {KIND_LETTER[order.target_unit]} {order.target} - {order.dest}"
    if t == RETREAT:
        return f"{head} R {order.dest}"
    if t == DISBAND:
        return f"{head} D"
    return f"{head} B"


def render_suffix(order: Order, spec: MapSpec) -> str:
    """Verbose text without the ``<kind> in <place>`` actor prefix."""
    t = order.type
    name = spec.display
    if t == HOLD:
        return "holds"
    if t == MOVE:
        return f"moves to {name(order.dest)}"
    if t == SUPPORT_HOLD:
        return f"supports {order.target_unit} in {name(order.target)}"
    if t == SUPPORT_MOVE:
        return f"supports {order.target_unit} in {name(order.target)} move to {name(order.dest)}"
    if t == RETREAT:
        return f"retreats to {name(order.dest)}"
    if t == DISBAND:
        return "disbands"
    raise OrderError(f"{t} orders have no actor-relative form")


def render_actor(unit: str, loc: str, spec: MapSpec) -> str:
    return f"{unit} in {spec.display(loc)}"


def render_order(order: Order, dialect: str = SHORT, spec: MapSpec | None = None) -> str:
    if dialect == SHORT:
        return render_short(order)
    if dialect != VERBOSE:
        raise ValueError(f"unknown dialect {dialect!r}")
    if spec is None:
        raise ValueError("the verbose dialect needs a map for province names")
    if order.type == WAIVE:
        return "waive"
    if order.type == BUILD:
        return f"build {order.unit} in {spec.display(order.loc)}"
    return f"{render_actor(order.unit, order.loc, spec)} {render_suffix(order, spec)}"


# ------------------------------------------------------------------ parsing

_DASH = re.compile(r"\s*[-–—]\s*")


def _node(token: str, spec: MapSpec) -> str:
    tok = token.strip().upper()
    if tok in spec.by_id or tok in spec.coast_names:
        return tok
    raise UnknownProvinceError(f"unknown province {token!r}")


def _place(text: str, spec: MapSpec) -> str:
    node = spec.name_index.get(text.strip().lower())
    if node is None:
        raise UnknownProvinceError(f"unknown province {text.strip()!r}")
    return node


def _resolve_move_dest(kind: str, loc: str, dest: str, spec: MapSpec) -> str:
    """A fleet may name a split-coast province without its coast when only
    one coast is reachable."""
    if kind != FLEET or "/" in dest or not spec.province(dest).coasts:
        return dest
    options = [n for n in spec.adjacent(FLEET, loc) if province_of(n) == dest]
    if len(options) == 1:
        return options[0]
    if not options:
        return dest
    raise OrderParseError(f"fleet move to {dest} must name a coast ({', '.join(options)})")


def parse_short(text: str, spec: MapSpec) -> Order:
    norm = _DASH.sub(" - ", text.strip())
    toks = norm.split()
    if not toks:
        raise OrderParseError("empty order text")
    if len(toks) == 1 and toks[0].upper() == "WAIVE":
        return Order.waive()
    if len(toks) < 3 or toks[0].upper() not in LETTER_KIND:
        raise OrderParseError(f"cannot parse order {text!r}")
    kind = LETTER_KIND[toks[0].upper()]
    loc = _node(toks[1], spec)
    verb = toks[2].upper()
    rest = toks[3:]
    try:
        if verb == "H" and not rest:
            return Order.hold(kind, loc)
        if verb == "-" and len(rest) == 1:
            return Order.move(kind, loc, _resolve_move_dest(kind, loc, _node(rest[0], spec), spec))
        if verb == "R" and len(rest) == 1:
            return Order.retreat(kind, loc, _resolve_move_dest(kind, loc, _node(rest[0], spec), spec))
        if verb == "D" and not rest:
            return Order.disband(kind, loc)
        if verb == "B" and not rest:
            return Order.build(kind, loc)
        if verb == "S" and len(rest) >= 2 and rest[0].upper() in LETTER_KIND:
            tkind = LETTER_KIND[rest[0].upper()]
            target = _node(rest[1], spec)
            if len(rest) == 2:
                return Order.support_hold(kind, loc, tkind, target)
            if len(rest) == 4 and rest[2] == "-":
                return Order.support_move(kind, loc, tkind, target, _node(rest[3], spec))
    except OrderError as exc:
        if isinstance(exc, OrderParseError):
            raise
        raise OrderParseError(str(exc)) from exc
    raise OrderParseError(f"cannot parse order {text!r}")


_K = r"(army|fleet)"
_VERBOSE_FORMS = [
    ("support_move", re.compile(rf"^{_K} in (.+?) supports {_K} in (.+?) move to (.+)$", re.I)),
    ("support_hold", re.compile(rf"^{_K} in (.+?) supports {_K} in (.+)$", re.I)),
    ("move", re.compile(rf"^{_K} in (.+?) moves to (.+)$", re.I)),
    ("retreat", re.compile(rf"^{_K} in (.+?) retreats to (.+)$", re.I)),
    ("hold", re.compile(rf"^{_K} in (.+) holds$", re.I)),
    ("disband", re.compile(rf"^{_K} in (.+) disbands$", re.I)),
    ("build", re.compile(rf"^build {_K} in (.+)$", re.I)),
]


def parse_verbose(text: str, spec: MapSpec) -> Order:
    norm = " ".join(text.strip().split())
    if not norm:
        raise OrderParseError("empty order text")
    if norm.lower() == "waive":
        return Order.waive()
    for form, rx in _VERBOSE_FORMS:
        m = rx.match(norm)
        if not m:
            continue
        g = m.groups()
        kind = g[0].lower()
        loc = _place(g[1], spec)
        try:
            if form == "support_move":
                return Order.support_move(kind, loc, g[2].lower(), _place(g[3], spec), _place(g[4], spec))
            if form == "support_hold":
                return Order.support_hold(kind, loc, g[2].lower(), _place(g[3], spec))
            if form == "move":
                return Order.move(kind, loc, _resolve_move_dest(kind, loc, _place(g[2], spec), spec))
            if form == "retreat":
                return Order.retreat(kind, loc, _resolve_move_dest(kind, loc, _place(g[2], spec), spec))
            if form == "hold":
                return Order.hold(kind, loc)
            if form == "disband":
                return Order.disband(kind, loc)
            return Order.build(kind, loc)
        except OrderParseError:
            raise
        except OrderError as exc:
            raise OrderParseError(str(exc)) from exc
    raise OrderParseError(f"cannot parse order {text!r}")


def parse_order(text: str, dialect: str, state) -> Order:
    """Parse ``text`` and check that its actor exists in ``state``."""
    spec = state.map
    if dialect == SHORT:
        order = parse_short(text, spec)
    elif dialect == VERBOSE:
        order = parse_verbose(text, spec)
    else:
        raise ValueError(f"unknown dialect {dialect!r}")
    _check_actor(order, state)
    return order


def parse_suffix(text: str, unit, state) -> Order:
    """Parse a candidate-list entry such as ``moves to Greece`` for ``unit``."""
    prefix = render_actor(unit.kind, unit.location, state.map)
    return parse_order(f"{prefix} {text}", VERBOSE, state)


def _check_actor(order: Order, state) -> None:
    if order.type in (WAIVE, BUILD):
        return
    if order.type == RETREAT or (order.type == DISBAND and state.phase.endswith("retreat")):
        pool = [d.unit for d in state.dislodged]
    else:
        pool = state.units
    for u in pool:
        if u.location == order.loc:
            if u.kind != order.unit:
                raise NoSuchUnitError(f"the unit in {order.loc} is a {u.kind}, not a {order.unit}")
            return
    raise NoSuchUnitError(f"no {order.unit} in {order.loc}")


def joint_from_texts(power: str, texts: Iterable[str], state, dialect: str = SHORT) -> JointAction:
    return JointAction(power, tuple(parse_order(t, dialect, state) for t in texts))
