"""Reading and writing network, partition, report and graph files.

Network files are a subset of the EPANET INP format: ``[JUNCTIONS]``,
``[RESERVOIRS]``, ``[PIPES]`` and ``[OPTIONS]``, plus two extra sections,
``[DESIGN]`` (``H_STAR <m>``) and ``[DEVICES]`` (``<link> FLOW_METER|GATE_VALVE``).
Demands are read in L/s and diameters in mm; both are stored in SI units.
"""
from __future__ import annotations

import csv
import io
import json
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from decimal import Decimal, DecimalException, InvalidOperation

from .errors import InpParseError
from .model import (
    DEFAULT_H_STAR,
    Device,
    Link,
    LinkStatus,
    Network,
    Node,
    NodeKind,
    Partition,
    boundary_links,
    natural_key,
    natural_sorted,
)
from .multiscale import MsNetwork

SUPPORTED = ("TITLE", "OPTIONS", "DESIGN", "JUNCTIONS", "RESERVOIRS", "PIPES", "DEVICES", "END")
# carried along untouched; none of these changes steady-state hydraulics
PRESERVED = (
    "COORDINATES", "VERTICES", "LABELS", "BACKDROP", "TAGS", "REPORT", "TIMES",
    "ENERGY", "QUALITY", "REACTIONS", "SOURCES", "MIXING", "PATTERNS", "CURVES",
)
REJECTED = ("PUMPS", "TANKS", "VALVES", "CONTROLS", "RULES", "DEMANDS", "STATUS", "EMITTERS")
MANDATORY = ("JUNCTIONS", "RESERVOIRS", "PIPES")

_DEVICE_TOKENS = {
    "FLOW_METER": Device.FLOW_METER, "FM": Device.FLOW_METER,
    "GATE_VALVE": Device.GATE_VALVE, "GV": Device.GATE_VALVE,
}


@dataclass
class Row:
    line: int
    tokens: list[str]
    raw: str = ""


@dataclass
class InpDocument:
    """Tokenised sections in file order; comments stripped, raw text kept."""

    sections: "OrderedDict[str, list[Row]]" = field(default_factory=OrderedDict)
    header_lines: dict[str, int] = field(default_factory=dict)


def _decode(text) -> str:
    if isinstance(text, (bytes, bytearray)):
        try:
            return bytes(text).decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise InpParseError(f"file is not valid UTF-8 ({exc.reason})") from None
    if not isinstance(text, str):
        raise InpParseError(f"expected text, got {type(text).__name__}")
    return text


def parse_document(text) -> InpDocument:
    text = _decode(text)
    doc = InpDocument()
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split(";", 1)[0].strip()
        if not body:
            continue
        if body.startswith("["):
            if not body.endswith("]") or len(body) < 3:
                raise InpParseError("malformed section header", lineno, body)
            name = body[1:-1].strip().upper()
            if name in REJECTED:
                raise InpParseError(f"section [{name}] is not supported (pipes and reservoirs only)", lineno, body)
            if name not in SUPPORTED and name not in PRESERVED:
                raise InpParseError("unknown section", lineno, body)
            if name in doc.sections and name != "END":
                raise InpParseError("section appears twice", lineno, body)
            doc.sections.setdefault(name, [])
            doc.header_lines[name] = lineno
            current = name
            continue
        if current is None:
            raise InpParseError("data before the first section header", lineno, body.split()[0])
        doc.sections[current].append(Row(lineno, body.split(), raw))
    return doc


def _num(tok: str, row: Row, what: str) -> float:
    try:
        x = float(tok)
    except ValueError:
        raise InpParseError(f"{what} is not a number", row.line, tok) from None
    if not math.isfinite(x):
        raise InpParseError(f"{what} must be finite", row.line, tok)
    return x


def _scaled(tok: str, row: Row, what: str, power: int) -> float:
    """Exact decimal rescaling, so emitted values read back bit-identical."""
    try:
        d = Decimal(tok)
    except (InvalidOperation, ValueError):
        raise InpParseError(f"{what} is not a number", row.line, tok) from None
    try:
        x = float(d.scaleb(power)) if d.is_finite() else float("nan")
    except (DecimalException, ValueError, OverflowError):
        x = float("nan")
    if not math.isfinite(x):
        raise InpParseError(f"{what} must be finite", row.line, tok)
    return x


def _fmt_scaled(x: float, power: int) -> str:
    return format(Decimal(repr(float(x))).scaleb(power).normalize(), "f") if x == x and abs(x) != float("inf") else repr(x)


def _fmt(x: float) -> str:
    return repr(float(x))


def _need(row: Row, lo: int, hi: int, section: str):
    n = len(row.tokens)
    if n < lo:
        raise InpParseError(f"[{section}] row needs at least {lo} fields", row.line, row.tokens[-1])
    if n > hi:
        raise InpParseError(f"[{section}] row has unexpected extra field", row.line, row.tokens[hi])


def parse_network(text) -> Network:
    doc = parse_document(text)
    for name in MANDATORY:
        if name not in doc.sections:
            raise InpParseError(f"missing mandatory section [{name}]")

    for row in doc.sections.get("OPTIONS", []):
        key = row.tokens[0].upper()
        val = " ".join(row.tokens[1:]).upper()
        if key == "HEADLOSS" and val not in ("H-W", "HW", "HAZEN-WILLIAMS"):
            raise InpParseError("only Hazen-Williams head loss is supported", row.line, row.tokens[-1])
        if key == "UNITS" and val != "LPS":
            raise InpParseError("flow units must be LPS", row.line, row.tokens[-1])

    h_star = DEFAULT_H_STAR
    for row in doc.sections.get("DESIGN", []):
        key = row.tokens[0].upper()
        if key != "H_STAR":
            raise InpParseError("unknown [DESIGN] parameter", row.line, row.tokens[0])
        _need(row, 2, 2, "DESIGN")
        h_star = _num(row.tokens[1], row, "design pressure head")

    nodes = []
    for row in doc.sections["JUNCTIONS"]:
        _need(row, 2, 4, "JUNCTIONS")
        t = row.tokens
        elev = _num(t[1], row, "elevation")
        demand = _scaled(t[2], row, "demand", -3) if len(t) > 2 else 0.0
        nodes.append(Node(t[0], NodeKind.JUNCTION, elev, demand))
    for row in doc.sections["RESERVOIRS"]:
        _need(row, 2, 3, "RESERVOIRS")
        nodes.append(Node(row.tokens[0], NodeKind.RESERVOIR, _num(row.tokens[1], row, "head"), 0.0))

    links = []
    for row in doc.sections["PIPES"]:
        _need(row, 6, 8, "PIPES")
        t = row.tokens
        status = LinkStatus.OPEN
        rest = t[6:]
        if len(rest) == 2 or (len(rest) == 1 and rest[0].upper() not in ("OPEN", "CLOSED", "CV")):
            minor = _num(rest[0], row, "minor loss")
            if minor != 0:
                raise InpParseError("minor losses are not supported", row.line, rest[0])
            rest = rest[1:]
        if rest:
            st = rest[0].upper()
            if st == "CV":
                raise InpParseError("check valves are not supported", row.line, rest[0])
            if st not in ("OPEN", "CLOSED"):
                raise InpParseError("pipe status must be Open or Closed", row.line, rest[0])
            status = LinkStatus(st.lower())
        links.append(
            Link(
                t[0], t[1], t[2],
                length=_num(t[3], row, "length"),
                diameter=_scaled(t[4], row, "diameter", -3),
                roughness=_num(t[5], row, "roughness"),
                status=status,
            )
        )

    index = {lk.id: i for i, lk in enumerate(links)}
    for row in doc.sections.get("DEVICES", []):
        _need(row, 2, 2, "DEVICES")
        lid, dev = row.tokens
        if lid not in index:
            raise InpParseError("device on unknown pipe", row.line, lid)
        kind = _DEVICE_TOKENS.get(dev.upper())
        if kind is None:
            raise InpParseError("device must be FLOW_METER or GATE_VALVE", row.line, dev)
        i = index[lid]
        lk = links[i]
        links[i] = Link(lk.id, lk.from_node, lk.to_node, lk.length, lk.diameter, lk.roughness, lk.status, kind)
    return Network(tuple(nodes), tuple(links), h_star)


def emit_network(network: Network, title: str | None = None) -> str:
    out = []
    if title:
        out += ["[TITLE]", title, ""]
    out += ["[OPTIONS]", "Units  LPS", "Headloss  H-W", ""]
    out += ["[DESIGN]", f"H_STAR  {_fmt(network.h_star)}", ""]
    out += ["[JUNCTIONS]", ";ID  Elev(m)  Demand(L/s)"]
    out += [f"{n.id}  {_fmt(n.elevation)}  {_fmt_scaled(n.base_demand, 3)}" for n in network.junctions]
    out += ["", "[RESERVOIRS]", ";ID  Head(m)"]
    out += [f"{n.id}  {_fmt(n.head)}" for n in network.reservoirs]
    out += ["", "[PIPES]", ";ID  Node1  Node2  Length(m)  Diameter(mm)  Roughness  MinorLoss  Status"]
    for lk in network.links:
        status = "Open" if lk.is_open else "Closed"
        out.append(
            f"{lk.id}  {lk.from_node}  {lk.to_node}  {_fmt(lk.length)}  {_fmt_scaled(lk.diameter, 3)}  "
            f"{_fmt(lk.roughness)}  0  {status}"
        )
    devs = [lk for lk in network.links if lk.device != Device.NONE]
    if devs:
        out += ["", "[DEVICES]"]
        out += [f"{lk.id}  {lk.device.value.upper()}" for lk in devs]
    out += ["", "[END]", ""]
    return "\n".join(out)


def parse_partition(text) -> Partition:
    """Read a ``node_id,dma`` CSV."""
    text = _decode(text)
    reader = csv.reader(io.StringIO(text))
    labels: dict[str, str] = {}
    header_seen = False
    rows = iter(reader)
    while True:
        try:
            row = next(rows)
        except StopIteration:
            break
        except csv.Error as exc:
            raise InpParseError(str(exc), max(reader.line_num, 1)) from None
        lineno = reader.line_num
        cells = [c.strip() for c in row]
        if not cells or all(not c for c in cells):
            continue
        if not header_seen:
            if [c.lower() for c in cells] != ["node_id", "dma"]:
                raise InpParseError("partition header must be 'node_id,dma'", lineno, ",".join(row))
            header_seen = True
            continue
        if len(cells) != 2 or not cells[0] or not cells[1]:
            raise InpParseError("expected 'node_id,dma'", lineno, ",".join(row))
        node, dma = cells
        if node in labels:
            raise InpParseError(f"duplicate row for node {node!r}", lineno, node)
        labels[node] = dma
    if not header_seen:
        raise InpParseError("empty partition file")
    return Partition(labels)


def emit_partition(partition: Partition) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["node_id", "dma"])
    for node in natural_sorted(partition.labels):
        w.writerow([node, partition.labels[node]])
    return buf.getvalue()


def emit_report(report) -> str:
    """Deterministic JSON (sorted keys, 6 significant digits)."""
    from .dss import sig6

    return json.dumps(sig6(report.to_dict()), indent=2, sort_keys=True) + "\n"


def parse_report(text):
    from .dss import Report

    try:
        return Report.from_dict(json.loads(_decode(text)))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InpParseError(f"invalid report: {exc}") from None


_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
)


def _q(s: str) -> str:
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def emit_graph(network: Network, layout: Partition | MsNetwork | None = None) -> str:
    """DOT rendering: nodes coloured by district, boundary links bold.

    With an ``MsNetwork`` only boundary nodes are drawn and internal
    hyper-links are dashed.
    """
    lines = ["graph wds {", "  node [style=filled];"]
    if isinstance(layout, MsNetwork):
        colour = {d: _PALETTE[i % len(_PALETTE)] for i, d in enumerate(layout.dmas)}
        for n, d in layout.ms_nodes.items():
            lines.append(f"  {_q(n)} [fillcolor={_q(colour[d])}, dma={_q(d)}];")
        for b in layout.boundary_hyperlinks:
            lines.append(f"  {_q(b.u)} -- {_q(b.v)} [id={_q(b.id)}, style=bold, weight={b.weight:.6g}];")
        for i in layout.internal_hyperlinks:
            lines.append(f"  {_q(i.u)} -- {_q(i.v)} [id={_q(i.id)}, style=dashed, color=grey, weight={i.weight:.6g}];")
    else:
        labels = layout.labels if layout is not None else {}
        dmas = sorted(set(labels.values()), key=natural_key)
        colour = {d: _PALETTE[i % len(_PALETTE)] for i, d in enumerate(dmas)}
        bset = boundary_links(network, layout) if layout is not None else frozenset()
        for n in network.nodes:
            attrs = [f"shape={'box' if n.is_reservoir else 'ellipse'}"]
            if n.id in labels:
                attrs += [f"fillcolor={_q(colour[labels[n.id]])}", f"dma={_q(labels[n.id])}"]
            lines.append(f"  {_q(n.id)} [{', '.join(attrs)}];")
        for lk in network.links:
            attrs = [f"id={_q(lk.id)}"]
            if lk.id in bset:
                attrs.append("style=bold")
                if lk.device == Device.GATE_VALVE:
                    attrs.append("color=red")
                elif lk.device == Device.FLOW_METER:
                    attrs.append("color=blue")
            lines.append(f"  {_q(lk.from_node)} -- {_q(lk.to_node)} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
