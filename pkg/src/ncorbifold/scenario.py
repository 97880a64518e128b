"""JSON scenario files: schema validation, object construction, round-trip dump.

Schema (version 1); every entity list holds objects with a unique ``id``::

    {
      "schema_version": 1,
      "name": "reflection_c6",
      "convention": "counting" | "normalized",
      "seed": 0,
      "groups":  [{"id", "kind": "cyclic", "order"} | {"id", "kind": "symmetric", "degree"}
                  | {"id", "kind": "trivial"} | {"id", "kind": "table", "table", "identity"}],
      "graphs":  [{"id", "kind": "circle", "n", "circumference"}
                  | {"id", "kind": "torus", "n", "m", "lx", "ly"}
                  | {"id", "kind": "explicit", "vertices": [vid, ...], "edges": [[vid, vid, length], ...]}],
      "actions": [{"id", "group", "graph", "kind": "rotation" | "reflection" | "trivial"}
                  | {"id", "group", "graph", "kind": "table", "table": {"<element>": [image vid per vertex]}}],
      "triples": [{"id", "action" | "over": {"bitorsor", "side": "left" | "right"},
                   "rank", "cocycle": "trivial" | "swap", "dirac": "circle" | "torus",
                   "graded", "base_dimension"}],
      "bitorsors": [{"id", "kind": "identity" | "quotient", "action"} | {"id", "kind": "dual", "of"}
                    | {"id", "kind": "compose", "left", "right"}
                    | {"id", "kind": "explicit", "left_action", "right_action",
                       "alpha", "rho", "left", "right", "edges" (optional)}],
      "families": [{"id", "kind": "rotation_quotient" | "reflection" | "circle",
                    "order", "rank", "circumference", "graded"}],
      "tasks": [{"type": "validate", "bitorsor"}
                | {"type": "imprimitivity", "bitorsor", "samples"}
                | {"type": "morita", "bitorsor", "t1", "t2", "family", "refinements"}
                | {"type": "distance", "triple", "pairs", "invariant_only"}
                | {"type": "theorem3", "family", "refinements", "endpoints"}
                | {"type": "spectrum", "triple", "invariant"}]
    }

In a morita task ``t1`` lives on the right (rho) groupoid and ``t2`` on the
left (alpha) groupoid. Endpoints in theorem3 tasks are integers or strings
``"n/k"`` / ``"n/k+c"`` evaluated per refinement.
"""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algebra import ActionGroupoid, Haar, StructuralError
from .bitorsor import (MoritaBitorsor, PreconditionError, compose_bitorsors, dual_bitorsor, identity_bitorsor,
                       lift_graph, quotient_bitorsor)
from .dirac import ContractError, SpectralTriple, circle_dirac, circle_grading, swap_bundle, torus_dirac, \
    trivial_bundle
from .geometry import DiscreteOrbifold, GeometryError, MetricGraph, refine_circle, torus_graph
from .groups import (FiniteGroup, GroupAction, GroupError, cycle_reflection, cycle_rotation, cyclic_group,
                     symmetric_group, trivial_group)

SCHEMA_VERSION = 1
SECTIONS = ("groups", "graphs", "actions", "bitorsors", "triples", "families")
TOP_KEYS = {"schema_version", "name", "convention", "seed", "tasks", *SECTIONS}
TASK_TYPES = ("validate", "imprimitivity", "morita", "distance", "theorem3", "spectrum")


class ScenarioError(ValueError):
    """Input error with a category and a file/line location."""

    def __init__(self, kind: str, message: str, path=None, line=None):
        self.kind, self.path, self.line = kind, path, line
        where = f"{path}:{line}: " if path is not None and line is not None else (f"{path}: " if path else "")
        super().__init__(f"{where}{kind}: {message}")


def _line_of(text: str, *needles) -> int | None:
    """First line containing the quoted needles in order (best-effort location)."""
    if not text:
        return None
    pos = 0
    for nd in needles:
        i = text.find(json.dumps(nd) if isinstance(nd, str) else str(nd), pos)
        if i < 0:
            break
        pos = i
    return text.count("\n", 0, pos) + 1


@dataclass
class Scenario:
    spec: dict  # canonical JSON form
    path: str = None
    text: str = field(default="", repr=False)
    groups: dict = field(default_factory=dict)
    graphs: dict = field(default_factory=dict)
    vertex_index: dict = field(default_factory=dict)
    actions: dict = field(default_factory=dict)
    groupoids: dict = field(default_factory=dict)
    bitorsors: dict = field(default_factory=dict)
    triples: dict = field(default_factory=dict)
    families: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.spec["name"]

    @property
    def convention(self) -> Haar:
        return Haar.parse(self.spec["convention"])

    @property
    def seed(self) -> int:
        return self.spec["seed"]

    @property
    def tasks(self) -> list:
        return self.spec["tasks"]


class _Loader:
    def __init__(self, spec: dict, path, text: str):
        self.sc = Scenario(spec, None if path is None else str(path), text)
        self.path, self.text = self.sc.path, text

    def err(self, kind, msg, *needles):
        return ScenarioError(kind, msg, self.path, _line_of(self.text, *needles))

    def ref(self, table: str, key, owner: str, field_name: str):
        store = getattr(self.sc, table)
        if key not in store:
            raise self.err("unresolved reference", f"{owner} field '{field_name}' names unknown {table[:-1]} {key!r}",
                           owner.split("'")[1] if "'" in owner else owner, field_name)
        return store[key]

    def need(self, obj: dict, key: str, owner: str):
        if key not in obj:
            raise self.err("invariant violation", f"{owner} is missing field '{key}'", owner.split("'")[1])
        return obj[key]

    # entities

    def group(self, g: dict) -> FiniteGroup:
        kind, gid = g.get("kind"), g["id"]
        if kind == "cyclic":
            return cyclic_group(int(self.need(g, "order", f"group '{gid}'")))
        if kind == "symmetric":
            return symmetric_group(int(self.need(g, "degree", f"group '{gid}'")))
        if kind == "trivial":
            return trivial_group()
        if kind == "table":
            return FiniteGroup(np.array(self.need(g, "table", f"group '{gid}'")), int(g.get("identity", 0)), gid)
        raise self.err("invariant violation", f"group '{gid}' has unknown kind {kind!r}", gid)

    def graph(self, g: dict):
        kind, gid = g.get("kind"), g["id"]
        owner = f"graph '{gid}'"
        if kind == "circle":
            n = int(self.need(g, "n", owner))
            return refine_circle(n, float(g.get("circumference", n))), {_vkey(j): j for j in range(n)}
        if kind == "torus":
            n, m = int(self.need(g, "n", owner)), int(self.need(g, "m", owner))
            return torus_graph(n, m, float(g.get("lx", n)), float(g.get("ly", m))), {_vkey(j): j for j in range(n * m)}
        if kind == "explicit":
            verts = self.need(g, "vertices", owner)
            index = {}
            for v in verts:
                key = _vkey(v)
                if key in index:
                    raise self.err("invariant violation", f"{owner} lists vertex id {v!r} twice", gid, "vertices")
                index[key] = len(index)
            edges = []
            for e in self.need(g, "edges", owner):
                if len(e) != 3:
                    raise self.err("invariant violation", f"{owner} edge {e!r} is not [u, v, length]", gid, "edges")
                for v in e[:2]:
                    if _vkey(v) not in index:
                        raise self.err("unresolved reference", f"{owner} edge {e!r} names unknown vertex {v!r}",
                                       gid, "edges")
                edges.append((index[_vkey(e[0])], index[_vkey(e[1])], float(e[2])))
            return MetricGraph.from_edge_list(len(index), edges), index
        raise self.err("invariant violation", f"{owner} has unknown kind {kind!r}", gid)

    def action(self, a: dict) -> GroupAction:
        aid = a["id"]
        owner = f"action '{aid}'"
        G = self.ref("groups", self.need(a, "group", owner), owner, "group")
        graph = self.ref("graphs", self.need(a, "graph", owner), owner, "graph")
        n = graph.n_vertices
        kind = a.get("kind")
        if kind == "rotation":
            act = cycle_rotation(n, G.order)
            if not np.array_equal(act.group.table, G.table):
                raise self.err("invariant violation", f"{owner}: rotation needs a cyclic group", aid)
            return GroupAction(G, act.table)
        if kind == "reflection":
            if G.order != 2:
                raise self.err("invariant violation", f"{owner}: reflection needs a group of order 2", aid)
            tab = cycle_reflection(n).table
            return GroupAction(G, tab if G.identity == 0 else tab[::-1])
        if kind == "trivial":
            return GroupAction(G, np.tile(np.arange(n), (G.order, 1)))
        if kind == "table":
            tab = self.need(a, "table", owner)
            index = self.sc.vertex_index[a["graph"]]
            rows = []
            for g in G.elements:
                if str(g) not in tab:
                    raise self.err("unresolved reference", f"{owner} has no entry for group element {g}",
                                   aid, "table")
                row = tab[str(g)]
                if len(row) != n:
                    raise self.err("invariant violation",
                                   f"{owner} entry for element {g} has {len(row)} images, expected {n}", aid, "table")
                try:
                    rows.append([index[_vkey(v)] for v in row])
                except KeyError as exc:
                    raise self.err("unresolved reference", f"{owner} maps to unknown vertex {exc.args[0]!r}",
                                   aid, "table") from None
            extra = set(tab) - {str(g) for g in G.elements}
            if extra:
                raise self.err("invariant violation", f"{owner} has entries for non-elements {sorted(extra)}", aid)
            return GroupAction(G, np.array(rows))
        raise self.err("invariant violation", f"{owner} has unknown kind {kind!r}", aid)

    def groupoid(self, aid: str) -> ActionGroupoid:
        if aid not in self.sc.groupoids:
            self.sc.groupoids[aid] = ActionGroupoid(self.sc.actions[aid], self.sc.convention)
        return self.sc.groupoids[aid]

    def bitorsor(self, b: dict) -> MoritaBitorsor:
        bid, kind = b["id"], b.get("kind")
        owner = f"bitorsor '{bid}'"
        if kind in ("identity", "quotient"):
            aid = self.need(b, "action", owner)
            self.ref("actions", aid, owner, "action")
            graph = self.sc.graphs[self.spec_of("actions", aid)["graph"]]
            if kind == "identity":
                return identity_bitorsor(self.groupoid(aid), graph)
            return quotient_bitorsor(DiscreteOrbifold(graph, self.sc.actions[aid]), self.sc.convention)
        if kind == "dual":
            return dual_bitorsor(self.ref("bitorsors", self.need(b, "of", owner), owner, "of"))
        if kind == "compose":
            p = self.ref("bitorsors", self.need(b, "left", owner), owner, "left")
            q = self.ref("bitorsors", self.need(b, "right", owner), owner, "right")
            return compose_bitorsors(p, q)
        if kind == "explicit":
            la = self.need(b, "left_action", owner)
            ra = self.need(b, "right_action", owner)
            self.ref("actions", la, owner, "left_action")
            self.ref("actions", ra, owner, "right_action")
            tabs = {k: np.array(self.need(b, k, owner), dtype=np.int64) for k in ("alpha", "rho", "left", "right")}
            out = MoritaBitorsor(self.groupoid(la), self.groupoid(ra), tabs["alpha"], tabs["rho"], tabs["left"],
                                 tabs["right"], None, self.sc.graphs[self.spec_of("actions", ra)["graph"]],
                                 self.sc.graphs[self.spec_of("actions", la)["graph"]], bid)
            if "edges" in b:
                out = lift_graph(out, b["edges"])
            return out
        raise self.err("invariant violation", f"{owner} has unknown kind {kind!r}", bid)

    def triple(self, t: dict) -> SpectralTriple:
        tid = t["id"]
        owner = f"triple '{tid}'"
        if "action" in t:
            aid = t["action"]
            self.ref("actions", aid, owner, "action")
            gpd = self.groupoid(aid)
            graph = self.sc.graphs[self.spec_of("actions", aid)["graph"]]
        elif "over" in t:
            over = t["over"]
            b = self.ref("bitorsors", over.get("bitorsor"), owner, "bitorsor")
            side = over.get("side")
            if side not in ("left", "right"):
                raise self.err("invariant violation", f"{owner}: side must be 'left' or 'right'", tid, "side")
            gpd = b.left_groupoid if side == "left" else b.right_groupoid
            graph = b.y_graph if side == "left" else b.x_graph
            if graph is None:
                raise self.err("invariant violation", f"{owner}: bitorsor side carries no graph", tid, "over")
        else:
            raise self.err("invariant violation", f"{owner} needs 'action' or 'over'", tid)
        rank = int(t.get("rank", 1))
        coc = t.get("cocycle", "trivial")
        if coc == "trivial":
            bundle = trivial_bundle(gpd.action, rank)
        elif coc == "swap":
            bundle = swap_bundle(gpd.action)
        else:
            raise self.err("invariant violation", f"{owner} has unknown cocycle {coc!r}", tid, "cocycle")
        kind = t.get("dirac", "circle")
        if kind == "circle":
            dirac = circle_dirac(graph, rank)
        elif kind == "torus":
            gspec = self.spec_of("graphs", self.spec_of("actions", t["action"])["graph"]) if "action" in t else {}
            if gspec.get("kind") != "torus" or rank != 2:
                raise self.err("invariant violation", f"{owner}: torus Dirac needs a torus graph and rank 2", tid)
            dirac = torus_dirac(graph, int(gspec["n"]), int(gspec["m"]))
        else:
            raise self.err("invariant violation", f"{owner} has unknown dirac {kind!r}", tid, "dirac")
        omega = None
        if t.get("graded", False):
            if rank != 2 or kind != "circle":
                raise self.err("invariant violation", f"{owner}: grading needs the rank-2 circle operator", tid)
            omega = circle_grading(graph.n_vertices)
        return SpectralTriple(gpd, bundle, dirac, omega, t.get("base_dimension"))

    def family(self, f: dict) -> dict:
        fid, kind = f["id"], f.get("kind")
        if kind not in ("rotation_quotient", "reflection", "circle"):
            raise self.err("invariant violation", f"family '{fid}' has unknown kind {kind!r}", fid)
        return f

    def spec_of(self, section: str, eid: str) -> dict:
        return next(e for e in self.sc.spec[section] if e["id"] == eid)

    # driver

    def build(self) -> Scenario:
        spec = self.sc.spec
        steps = (("groups", self.group), ("graphs", self.graph), ("actions", self.action),
                 ("bitorsors", self.bitorsor), ("triples", self.triple), ("families", self.family))
        for section, make in steps:
            store = getattr(self.sc, section)
            for ent in spec[section]:
                eid = ent["id"]
                try:
                    obj = make(ent)
                except ScenarioError:
                    raise
                except (GroupError, GeometryError, StructuralError, PreconditionError, ContractError,
                        ValueError, TypeError) as exc:
                    raise self.err("invariant violation", f"{section[:-1]} '{eid}': {exc}", eid) from None
                if section == "graphs":
                    obj, index = obj
                    self.sc.vertex_index[eid] = index
                store[eid] = obj
        for i, task in enumerate(spec["tasks"]):
            self.check_task(i, task)
        return self.sc

    def check_task(self, i: int, task: dict):
        ttype = task.get("type")
        if ttype not in TASK_TYPES:
            raise self.err("invariant violation", f"task {i} has unknown type {ttype!r}", "tasks", ttype or "type")
        refs = {"validate": [("bitorsor", "bitorsors")], "imprimitivity": [("bitorsor", "bitorsors")],
                "morita": [("bitorsor", "bitorsors"), ("t1", "triples"), ("t2", "triples")],
                "distance": [("triple", "triples")], "theorem3": [("family", "families")],
                "spectrum": [("triple", "triples")]}[ttype]
        for key, table in refs:
            val = task.get(key)
            if val is None:
                raise self.err("invariant violation", f"{ttype} task {i} is missing field '{key}'", "tasks", ttype)
            if val not in getattr(self.sc, table):
                raise self.err("unresolved reference", f"{ttype} task {i} field '{key}' names unknown "
                               f"{table[:-1]} {val!r}", "tasks", ttype, val)
        if ttype == "morita" and task.get("family") is not None:
            if task["family"] not in self.sc.families:
                raise self.err("unresolved reference", f"morita task {i} names unknown family {task['family']!r}",
                               "tasks", task["family"])
        if ttype == "theorem3":
            for pair in task.get("endpoints", []):
                for e in pair:
                    endpoint_value(e, 64)  # syntax check


def _vkey(v):
    return json.dumps(v)


_ENDPOINT = re.compile(r"^\s*n\s*/\s*(\d+)\s*(?:([+-])\s*(\d+))?\s*$")


def endpoint_value(expr, n: int) -> int:
    """Integer endpoint, or "n/k" / "n/k+c" evaluated at mesh size n (mod n)."""
    if isinstance(expr, bool):
        raise ScenarioError("invariant violation", f"bad endpoint {expr!r}")
    if isinstance(expr, int):
        return expr % n
    m = _ENDPOINT.match(str(expr))
    if not m:
        raise ScenarioError("invariant violation", f"bad endpoint expression {expr!r}")
    v = n // int(m.group(1))
    if m.group(2):
        v += int(m.group(3)) * (1 if m.group(2) == "+" else -1)
    return v % n


def canonicalize(raw, path=None, text: str = "") -> dict:
    """Check top-level structure and fill defaults; the result is the canonical scenario form."""
    def fail(kind, msg, *needles):
        return ScenarioError(kind, msg, path, _line_of(text, *needles))

    if not isinstance(raw, dict):
        raise fail("invariant violation", "scenario must be a JSON object", "{")
    unknown = set(raw) - TOP_KEYS
    if unknown:
        k = sorted(unknown)[0]
        raise fail("invariant violation", f"unknown top-level key {k!r}", k)
    ver = raw.get("schema_version", SCHEMA_VERSION)
    if ver != SCHEMA_VERSION:
        raise fail("invariant violation", f"unsupported schema_version {ver!r}", "schema_version")
    conv = raw.get("convention", "counting")
    if isinstance(conv, list):
        raise fail("invariant violation", "exactly one convention per scenario", "convention")
    try:
        Haar.parse(conv)
    except ValueError:
        raise fail("invariant violation", f"unknown convention {conv!r}", "convention") from None
    spec = {"schema_version": SCHEMA_VERSION, "name": str(raw.get("name", "")), "convention": str(conv).lower(),
            "seed": int(raw.get("seed", 0))}
    seen = {}
    for section in SECTIONS:
        items = raw.get(section, [])
        if not isinstance(items, list):
            raise fail("invariant violation", f"'{section}' must be a list", section)
        out = []
        for ent in items:
            if not isinstance(ent, dict) or "id" not in ent:
                raise fail("invariant violation", f"every entry of '{section}' needs an 'id'", section)
            eid = ent["id"]
            if (section, eid) in seen:
                raise fail("invariant violation", f"duplicate id {eid!r} in '{section}'", section, eid, eid)
            seen[(section, eid)] = True
            out.append(copy.deepcopy(ent))
        spec[section] = out
    tasks = raw.get("tasks", [])
    if not isinstance(tasks, list) or not all(isinstance(t, dict) for t in tasks):
        raise fail("invariant violation", "'tasks' must be a list of objects", "tasks")
    spec["tasks"] = copy.deepcopy(tasks)
    return spec


def build_scenario(raw, path=None, text: str = "", convention=None) -> Scenario:
    spec = canonicalize(raw, path, text)
    if convention is not None:
        spec["convention"] = Haar.parse(convention).value
    return _Loader(spec, path, text).build()


def load_scenario(path, convention=None) -> Scenario:
    p = Path(path)
    if not p.is_file():
        raise ScenarioError("parse error", "file not found", str(p))
    text = p.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("parse error", exc.msg, str(p), exc.lineno) from None
    return build_scenario(raw, str(p), text, convention)


def dumps(scenario: Scenario) -> str:
    return json.dumps(scenario.spec, indent=2, sort_keys=True) + "\n"


def dump_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(dumps(scenario))


def bundled_scenarios() -> dict:
    """Name -> path of the scenario files shipped with the package."""
    root = Path(__file__).parent / "scenarios"
    return {p.stem: p for p in sorted(root.glob("*.json"))}
