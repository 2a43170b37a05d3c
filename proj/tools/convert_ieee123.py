#!/usr/bin/env python3
"""Convert the OpenDSS description of the IEEE 123-node test feeder into the
gridstab feeder JSON format (and an optional per-phase load table).

Usage:
    convert_ieee123.py <dir with IEEE123Master.dss> -o ieee123.json [--loads loads.json]

Modelling choices made during conversion:
  * Voltage regulators (150/150r, 9/9r, 25/25r, 160/160r) are ideal, so each
    regulator bus pair is merged into a single node.
  * Normally-open tie switches (Sw7: 151-300, Sw8: 54-94) are dropped so the
    network stays radial.
  * Closed switches are kept as jumper lines with their tiny series resistance
    and zero reactance.
  * The 61s/610 load transformer becomes a series impedance on the system base.
  * Capacitors are ignored.
Line codes are given in ohm per kft and lengths in kft.
"""

import argparse
import json
import re
import sys
from pathlib import Path

OPEN_SWITCHES = {"sw7", "sw8"}
MERGED_BUSES = {"150r": "150", "9r": "9", "25r": "25", "160r": "160"}
PHASE_LETTERS = "ABC"


def logical_lines(path):
    """Yield DSS statements with '~' continuations folded in and comments stripped."""
    out = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("!")[0].strip()
        if not line:
            continue
        if line.startswith("~"):
            if out:
                out[-1] += " " + line[1:].strip()
            continue
        out.append(line)
    return out


def parse_props(stmt):
    props = {}
    # bracketed / parenthesised values may contain spaces and '|'
    for m in re.finditer(r"(\w[\w%]*)\s*=\s*(\[[^\]]*\]|\([^)]*\)|\S+)", stmt):
        props[m.group(1).lower()] = m.group(2)
    return props


def parse_matrix(text, n):
    body = text.strip("[]() ")
    rows = [r.split() for r in body.split("|")]
    m = [[0.0] * n for _ in range(n)]
    for i, row in enumerate(rows):
        for j, v in enumerate(row):
            m[i][j] = float(v)
            m[j][i] = float(v)
    return m


def bus_and_phases(spec, default_phases):
    parts = spec.split(".")
    bus = parts[0].lower()
    bus = MERGED_BUSES.get(bus, bus)
    nodes = [int(p) for p in parts[1:] if p and int(p) > 0]
    if not nodes:
        nodes = list(range(1, default_phases + 1))
    return bus, nodes


def node_id(bus):
    return "node_" + bus


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("dss_dir")
    ap.add_argument("-o", "--output", required=True)
    ap.add_argument("--loads", help="optional per-phase load table output")
    ap.add_argument("--base-kv", type=float, default=4.16)
    ap.add_argument("--base-mva", type=float, default=5.0)
    args = ap.parse_args(argv)

    d = Path(args.dss_dir)
    zbase = args.base_kv ** 2 / args.base_mva

    linecodes = {}
    for stmt in logical_lines(d / "IEEELineCodes.DSS"):
        m = re.match(r"new\s+linecode\.(\S+)", stmt, re.I)
        if not m:
            continue
        props = parse_props(stmt)
        n = int(props["nphases"])
        linecodes[m.group(1).lower()] = (
            parse_matrix(props["rmatrix"], n),
            parse_matrix(props["xmatrix"], n),
        )

    lines = []
    transformer = None
    for stmt in logical_lines(d / "IEEE123Master.dss"):
        m = re.match(r"new\s+line\.(\S+)", stmt, re.I)
        if m:
            name = m.group(1).lower()
            if name in OPEN_SWITCHES:
                continue
            props = parse_props(stmt)
            nph = int(props.get("phases", "3"))
            b1, ph1 = bus_and_phases(props["bus1"], nph)
            b2, ph2 = bus_and_phases(props["bus2"], nph)
            if ph1 != ph2:
                raise SystemExit(f"phase mismatch on {name}")
            length = float(props.get("length", "1"))
            z = [[[0.0, 0.0] for _ in range(3)] for _ in range(3)]
            if "linecode" in props:
                rm, xm = linecodes[props["linecode"].lower()]
                for a, pa in enumerate(ph1):
                    for b, pb in enumerate(ph1):
                        z[pa - 1][pb - 1] = [rm[a][b] * length / zbase,
                                             xm[a][b] * length / zbase]
            else:
                r1 = float(props.get("r1", "0"))
                x1 = float(props.get("x1", "0"))
                for pa in ph1:
                    z[pa - 1][pa - 1] = [r1 * length / zbase, x1 * length / zbase]
            lines.append({"id": name, "from": node_id(b1), "to": node_id(b2),
                          "phases": "".join(PHASE_LETTERS[p - 1] for p in ph1), "z": z})
            continue
        m = re.match(r"new\s+transformer\.xfm1", stmt, re.I)
        if m:
            transformer = stmt

    if transformer:
        props = parse_props(transformer)
        kva = float(re.findall(r"kva=(\S+)", transformer, re.I)[0])
        pct_r = sum(float(v) for v in re.findall(r"%r=(\S+)", transformer, re.I))
        xhl = float(props["xhl"])
        scale = args.base_mva * 1000.0 / kva
        r = pct_r / 100.0 * scale
        x = xhl / 100.0 * scale
        z = [[[r if i == j else 0.0, x if i == j else 0.0] for j in range(3)] for i in range(3)]
        lines.append({"id": "xfm1", "from": node_id("61s"), "to": node_id("610"),
                      "phases": "ABC", "z": z})

    phases = {node_id("150"): set("ABC")}
    for ln in lines:
        phases.setdefault(ln["to"], set()).update(ln["phases"])
        phases.setdefault(ln["from"], set())

    nodes = [{"id": nid, "phases": "".join(sorted(ph)) or "ABC"}
             for nid, ph in sorted(phases.items())]

    feeder = {
        "name": "ieee123",
        "base_kv": args.base_kv,
        "base_mva": args.base_mva,
        "substation": node_id("150"),
        "nodes": nodes,
        "lines": lines,
    }
    Path(args.output).write_text(json.dumps(feeder, indent=1) + "\n")
    print(f"wrote {len(nodes)} nodes, {len(lines)} lines to {args.output}", file=sys.stderr)

    if args.loads:
        loads = {}
        per_phase_base_kva = args.base_mva * 1000.0 / 3.0
        for stmt in logical_lines(d / "IEEE123Loads.DSS"):
            if not re.match(r"new\s+load\.", stmt, re.I):
                continue
            props = parse_props(stmt)
            nph = int(props.get("phases", "3"))
            bus, ph = bus_and_phases(props["bus1"], nph)
            kw, kvar = float(props["kw"]), float(props["kvar"])
            # line-to-line (delta) loads are split evenly across their two phases
            share = ph
            entry = loads.setdefault(node_id(bus), {"node": node_id(bus),
                                                    "p": [0.0, 0.0, 0.0], "q": [0.0, 0.0, 0.0]})
            for p in share:
                entry["p"][p - 1] += kw / len(share) / per_phase_base_kva
                entry["q"][p - 1] += kvar / len(share) / per_phase_base_kva
        Path(args.loads).write_text(json.dumps(
            {"units": "pu", "loads": sorted(loads.values(), key=lambda e: e["node"])}, indent=1) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
