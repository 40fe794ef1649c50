"""Batch front end: presentation files in, verification reports out.

A presentation is a JSON document (schema in ``data/presentation.schema.json``)
describing a base category, one fibre per base object, optional faults
injected into the structure maps, an external base with a pre-cotopology and
the analyses to run.  :func:`run` executes the pipeline stages in dependency
order and returns a report whose machine form is deterministic apart from
the ``timings`` block.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

import jsonschema

from . import __version__, algebra, fincat, kzero, local, monoidal
from .algebra import AlgebraConfig, FibredAlgebra
from .backends import EnumeratedFibre, EnumeratedIndexed, ModuleFibre, ModuleIndexed, finset_indexed
from .fincat import (
    DEFAULT_BUDGET,
    FinCatPresentation,
    FunctorPresentation,
    StructuralError,
    TruncationError,
    ValidationReport,
)

PRESENTATION_FORMAT = "fibredk-presentation/1"
REPORT_FORMAT = "fibredk-report/1"
STAGES = ("validate", "verify-opfibration", "verify-monoidal", "verify-modovermon", "build", "site", "loc", "k0")
DEPENDS = {
    "validate": (),
    "verify-opfibration": ("validate",),
    "verify-monoidal": ("verify-opfibration",),
    "verify-modovermon": ("verify-monoidal",),
    "build": ("verify-modovermon",),
    "site": ("build",),
    "loc": ("site",),
    "k0": ("validate",),
}
TOP_FIELDS = ("format", "name", "description", "universe", "base", "fibres", "transitions", "overrides",
              "external_base", "site", "analysis")
MODULE_BACKENDS = ("finite-module-over", "finite-abelian", "finite-field-vect")
BACKENDS = ("finite-set", "enumerated") + MODULE_BACKENDS
OVERRIDE_ARITY = {"cleavage": 2, "assoc": 3, "unit": 1, "unit_obj": 1, "lunit": 1, "runit": 1, "braid": 2}
WORKERS_ENV = "FIBREDK_WORKERS"

EXIT_PASS, EXIT_FAIL, EXIT_STRUCTURAL, EXIT_TRUNCATED = 0, 1, 2, 3


class ParseError(Exception):
    """A presentation that cannot be used; ``errors`` are ``location: message`` lines."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass
class Presentation:
    data: dict
    source: str = "<string>"

    @property
    def name(self) -> str:
        return self.data["name"]

    def __eq__(self, other) -> bool:
        return isinstance(other, Presentation) and self.data == other.data


# ---------------------------------------------------------------------------
# Bundled files


def _data_dir():
    return resources.files("fibredk") / "data"


def schema() -> dict:
    return json.loads((_data_dir() / "presentation.schema.json").read_text())


def bundled_examples() -> list[str]:
    return sorted(p.name[:-5] for p in (_data_dir() / "examples").iterdir() if p.name.endswith(".json"))


def example_path(name: str) -> Path:
    return Path(str(_data_dir() / "examples" / f"{name}.json"))


def _resolve_path(path: str | os.PathLike) -> Path:
    p = Path(path)
    if not p.exists() and str(path) in bundled_examples():
        return example_path(str(path))
    return p


# ---------------------------------------------------------------------------
# Parsing and serialization


def _loc(path) -> str:
    out = ""
    for part in path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "(root)"


def parse(path: str | os.PathLike) -> Presentation:
    """Read, schema-check and cross-reference a presentation file."""
    p = _resolve_path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ParseError([f"{p}: {e.strerror or e}"]) from None
    return parse_text(text, str(p))


def parse_text(text: str, source: str = "<string>") -> Presentation:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError([f"{source}:{e.lineno}:{e.colno}: {e.msg}"]) from None
    if not isinstance(data, dict):
        raise ParseError(["(root): a presentation is a JSON object"])
    fmt = data.get("format")
    if fmt != PRESENTATION_FORMAT:
        raise ParseError([f"format: unsupported version {fmt!r} (expected {PRESENTATION_FORMAT!r})"])
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(f"{_loc(e.absolute_path)}: {e.message}" for e in validator.iter_errors(data))
    if errors:
        raise ParseError(errors)
    errors = _cross_references(data)
    if errors:
        raise ParseError(errors)
    return Presentation(data, source)


def _sorted_tree(v):
    if isinstance(v, dict):
        return {k: _sorted_tree(v[k]) for k in sorted(v)}
    if isinstance(v, list):
        return [_sorted_tree(x) for x in v]
    return v


def serialize(pres: Presentation) -> str:
    """Canonical text: top-level fields in a fixed order, nested keys sorted."""
    d = pres.data
    out = {k: _sorted_tree(d[k]) for k in TOP_FIELDS if k in d}
    return json.dumps(out, indent=2, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# Cross references


def _category_refs(block: dict, where: str, errors: list[str]) -> None:
    objs = set(block["objects"])
    for a, (s, t) in sorted(block["arrows"].items()):
        for i, o in enumerate((s, t)):
            if o not in objs:
                errors.append(f"{where}.arrows.{a}[{i}]: unknown object {o!r}")
    for x, i in sorted(block.get("identities", {}).items()):
        if x not in objs:
            errors.append(f"{where}.identities.{x}: unknown object {x!r}")
        elif block["arrows"].get(i) != [x, x]:
            errors.append(f"{where}.identities.{x}: {i!r} is not an arrow {x} -> {x}")
    for n, row in enumerate(block.get("compose", [])):
        for i, a in enumerate(row):
            if a not in block["arrows"]:
                errors.append(f"{where}.compose[{n}][{i}]: unknown arrow {a!r}")
    if "compose" in block and "identities" not in block:
        errors.append(f"{where}.identities: required when a composition table is given")


def _arrow_ids(block: dict) -> set[str]:
    ids = set(block["arrows"])
    if "identities" not in block:
        ids |= {f"id_{x}" for x in block["objects"]}
    return ids


def _enumerated_refs(fib: dict, where: str, errors: list[str]) -> None:
    for key in ("category", "tensor", "unit", "assoc", "lunit", "runit"):
        if key not in fib:
            errors.append(f"{where}.{key}: required for the enumerated backend")
    if "category" not in fib:
        return
    cat = fib["category"]
    _category_refs(cat, f"{where}.category", errors)
    objs, arrows = set(cat["objects"]), _arrow_ids(cat)
    tensor = fib.get("tensor", {})
    for k, v in sorted(tensor.get("objects", {}).items()):
        if v not in objs:
            errors.append(f"{where}.tensor.objects.{k}: references missing object {v!r}")
        for part in k.split("|"):
            if part not in objs:
                errors.append(f"{where}.tensor.objects.{k}: key names missing object {part!r}")
    for k, v in sorted(tensor.get("morphisms", {}).items()):
        if v not in arrows:
            errors.append(f"{where}.tensor.morphisms.{k}: references missing morphism {v!r}")
    if "unit" in fib and fib["unit"] not in objs:
        errors.append(f"{where}.unit: references missing object {fib['unit']!r}")
    for table in ("assoc", "lunit", "runit", "braid"):
        for k, v in sorted(fib.get(table, {}).items()):
            if v not in arrows:
                errors.append(f"{where}.{table}.{k}: references missing morphism {v!r}")


def _cross_references(d: dict) -> list[str]:
    errors: list[str] = []
    base = d["base"]
    _category_refs(base, "base", errors)
    objs = list(base["objects"])
    fibres = d["fibres"]
    for b in objs:
        if b not in fibres:
            errors.append(f"fibres: no fibre over base object {b!r}")
    families = set()
    for b, fib in sorted(fibres.items()):
        where = f"fibres.{b}"
        if b not in objs:
            errors.append(f"{where}: unknown base object {b!r}")
        tag = fib["backend"]
        if tag not in BACKENDS:
            errors.append(f"{where}.backend: unknown backend tag {tag!r}")
            continue
        families.add("module" if tag in MODULE_BACKENDS else tag)
        need = {"finite-module-over": ("ring",), "finite-abelian": ("exponent",),
                "finite-field-vect": ("q", "dim_bound")}.get(tag, ())
        for k in need:
            if k not in fib:
                errors.append(f"{where}.{k}: required for the {tag} backend")
        if tag == "enumerated":
            _enumerated_refs(fib, where, errors)
    if len(families) > 1:
        errors.append(f"fibres: backend families cannot be mixed ({', '.join(sorted(families))})")
    if "finite-set" in families and len(objs) != 1:
        errors.append("fibres: the finite-set backend needs a one-object base")
    base_arrows = _arrow_ids(base)
    for f, tab in sorted(d.get("transitions", {}).items()):
        if f not in base["arrows"]:
            errors.append(f"transitions.{f}: unknown base arrow {f!r}")
    if families == {"enumerated"}:
        for f, (s, t) in sorted(base["arrows"].items()):
            if s == t and base.get("identities", {}).get(s, f"id_{s}") == f:
                continue
            if f not in d.get("transitions", {}):
                errors.append(f"transitions.{f}: required for enumerated fibres")
                continue
            tab = d["transitions"][f]
            src, tgt = fibres.get(s, {}).get("category"), fibres.get(t, {}).get("category")
            if src is None or tgt is None:
                continue
            for x, y in sorted(tab["objects"].items()):
                if x not in src["objects"]:
                    errors.append(f"transitions.{f}.objects.{x}: unknown object of fibre {s}")
                if y not in tgt["objects"]:
                    errors.append(f"transitions.{f}.objects.{x}: references missing object {y!r} of fibre {t}")
            for m, n in sorted(tab["morphisms"].items()):
                if n not in _arrow_ids(tgt):
                    errors.append(f"transitions.{f}.morphisms.{m}: references missing morphism {n!r}")
    for n, ov in enumerate(d.get("overrides", [])):
        k = ov["kind"]
        if len(ov["key"]) != OVERRIDE_ARITY[k]:
            errors.append(f"overrides[{n}].key: {k} overrides take {OVERRIDE_ARITY[k]} key entries")
        if k in ("cleavage", "unit") and ov["key"][0] not in base_arrows:
            errors.append(f"overrides[{n}].key[0]: unknown base arrow {ov['key'][0]!r}")
        if k == "unit_obj" and ov["key"][0] not in objs:
            errors.append(f"overrides[{n}].key[0]: unknown base object {ov['key'][0]!r}")
    ext = d.get("external_base")
    if ext is not None:
        cat = ext["category"]
        _category_refs(cat, "external_base.category", errors)
        for x in cat["objects"]:
            if x not in ext["monoids"]:
                errors.append(f"external_base.monoids: no monoid for object {x!r}")
        for x in sorted(ext["monoids"]):
            if x not in cat["objects"]:
                errors.append(f"external_base.monoids.{x}: unknown object {x!r}")
        for a, f in sorted(ext["morphisms"].items()):
            if a not in cat["arrows"]:
                errors.append(f"external_base.morphisms.{a}: unknown arrow {a!r}")
            if f not in base_arrows:
                errors.append(f"external_base.morphisms.{a}: references missing base arrow {f!r}")
    site = d.get("site")
    designations: dict = {}
    if site is not None:
        if ext is None:
            errors.append("site: needs an external_base block")
        else:
            cat = ext["category"]
            for b, fams in sorted(site["covers"].items()):
                if b not in cat["objects"]:
                    errors.append(f"site.covers.{b}: unknown object {b!r}")
                for i, fam in enumerate(fams):
                    for j, a in enumerate(fam):
                        if a not in _arrow_ids(cat):
                            errors.append(f"site.covers.{b}[{i}][{j}]: unknown arrow {a!r}")
            for name, des in sorted(site["designations"].items()):
                for i, o in enumerate(des["objects"]):
                    if o not in cat["objects"]:
                        errors.append(f"site.designations.{name}.objects[{i}]: unknown object {o!r}")
        designations = site["designations"]
    an = d.get("analysis", {})
    ext_objs = ext["category"]["objects"] if ext is not None else []
    for i, req in enumerate(an.get("loc", [])):
        if req["designation"] not in designations:
            errors.append(f"analysis.loc[{i}].designation: unknown designation {req['designation']!r}")
    for i, req in enumerate(an.get("k0", [])):
        if req["category"] == "fibre":
            if req["object"] not in objs:
                errors.append(f"analysis.k0[{i}].object: unknown base object {req['object']!r}")
        else:
            if req["object"] not in ext_objs:
                errors.append(f"analysis.k0[{i}].object: unknown external base object {req['object']!r}")
            if req.get("designation") not in designations:
                errors.append(f"analysis.k0[{i}].designation: unknown designation {req.get('designation')!r}")
    return errors


# ---------------------------------------------------------------------------
# Building the engine objects


def _category(block: dict, name: str) -> FinCatPresentation:
    name = block.get("name", name)
    arrows = {a: tuple(st) for a, st in block["arrows"].items()}
    if "identities" in block:
        table = {(g, f): h for g, f, h in block.get("compose", [])}
        return FinCatPresentation(block["objects"], arrows, block["identities"], table, name)
    return FinCatPresentation.thin(block["objects"], arrows, name)


def _fibre_bound(fib: dict, universe: int, cap: int | None) -> int:
    if fib["backend"] == "finite-field-vect":
        own = fib["q"] ** fib["dim_bound"]
    else:
        own = fib.get("bound", universe)
    return min(own, cap) if cap is not None else own


def _indexed(d: dict, base: FinCatPresentation, cap: int | None):
    universe = min(d["universe"]["bound"], cap) if cap is not None else d["universe"]["bound"]
    fibres = d["fibres"]
    tags = {f["backend"] for f in fibres.values()}
    name = d["name"]
    if tags == {"finite-set"}:
        (b,) = base.objects()
        return finset_indexed(_fibre_bound(fibres[b], universe, cap), base_obj=b, name=name)
    if tags <= set(MODULE_BACKENDS):
        rings = {}
        for b, fib in fibres.items():
            rings[b] = fib.get("ring") or fib.get("exponent") or fib.get("q")
        data = ModuleIndexed(base, rings, universe, name=name)
        for b, fib in fibres.items():
            data.fibres[b] = ModuleFibre(rings[b], _fibre_bound(fib, universe, cap), name=f"Mod({b})")
        return data
    cats = {b: _category(fib["category"], f"E_{b}") for b, fib in fibres.items()}
    efibres = {}
    for b, fib in fibres.items():
        t = fib["tensor"]
        efibres[b] = EnumeratedFibre(cats[b], t["objects"], t["morphisms"], fib["unit"], fib["assoc"],
                                     fib["lunit"], fib["runit"], fib.get("braid"), name=f"E_{b}")
    trans = {}
    for f, tab in d.get("transitions", {}).items():
        s, t = base.source(f), base.target(f)
        trans[f] = FunctorPresentation(cats[s], cats[t], tab["objects"], tab["morphisms"], f"{f}_*")
    return EnumeratedIndexed(base, efibres, trans, name=name)


def _override_key(kind: str, key: list[str]):
    return key[0] if OVERRIDE_ARITY[kind] == 1 else tuple(key)


@dataclass
class Settings:
    universe_bound: int | None = None
    strict: bool = False
    stage: str | None = None
    workers: int = 1


class Session:
    """Engine objects built from one presentation, filled in stage by stage."""

    def __init__(self, pres: Presentation, settings: Settings):
        d = pres.data
        self.pres = pres
        self.data = d
        self.settings = settings
        cap = settings.universe_bound
        u = d["universe"]
        self.budget = u.get("budget", DEFAULT_BUDGET)
        self.base = _category(d["base"], d["base"].get("name", "B"))
        self.indexed = _indexed(d, self.base, cap)
        M, self.construction = monoidal.grothendieck_construction(self.indexed, d["name"])
        overrides: dict[str, dict] = {}
        for n, ov in enumerate(d.get("overrides", [])):
            try:
                value = M.total.parse_mor(ov["value"])
            except (StructuralError, ValueError, KeyError) as e:
                raise ParseError([f"overrides[{n}].value: {e}"]) from None
            overrides.setdefault(ov["kind"], {})[_override_key(ov["kind"], ov["key"])] = value
        self.M = M.with_overrides(**overrides) if overrides else M
        mb = u.get("monoid_bound", 3)
        module_bound = u.get("module_bound")
        if cap is not None:
            mb = min(mb, cap)
            module_bound = min(module_bound, cap) if module_bound is not None else None
        self.config = AlgebraConfig(monoid_bound=mb, monoid_max_dim=u.get("monoid_max_dim"),
                                    module_bound=module_bound, budget=self.budget)
        self.analysis = d.get("analysis", {})
        self.alg: FibredAlgebra | None = None
        self.ext: local.ExternalBase | None = None
        self.J: local.PreCotopology | None = None
        self.designations: dict[str, local.TrivialDesignation] = {}
        self.pulled = None
        self.locs: dict[tuple[str, str], local.LocResult] = {}

    def algebra(self) -> FibredAlgebra:
        if self.alg is None:
            self.alg = FibredAlgebra(self.M, self.config)
        return self.alg

    # site ------------------------------------------------------------------

    def build_site(self) -> None:
        d = self.data
        alg = self.algebra()
        eb = d["external_base"]
        B = _category(eb["category"], eb["category"].get("name", "X"))
        E = self.M.total
        obj = {}
        for x, spec in sorted(eb["monoids"].items()):
            if isinstance(spec, str):
                found = [R for R in alg.Comm.objects() if R.id == spec]
                what = f"monoid {spec!r}"
            else:
                found = [R for R in alg.Comm.objects() if E.obj_id(R.R) == spec["carrier"]]
                what = f"carrier {spec['carrier']!r}"
            if len(found) != 1:
                raise StructuralError(f"external_base.monoids.{x}: {len(found)} commutative monoids match {what}")
            obj[x] = found[0]
        mor = {}
        for a, f in sorted(eb["morphisms"].items()):
            phi = alg.monoid_lift(f, obj[B.source(a)])
            if phi.tgt != obj[B.target(a)]:
                raise StructuralError(f"external_base.morphisms.{a}: the lift of {f} at F({B.source(a)}) ends at "
                                      f"{phi.tgt.id}, not at F({B.target(a)})")
            mor[a] = phi
        self.ext = local.ExternalBase(B, alg, obj, mor, name="F")
        site = d["site"]
        covers = {b: [tuple(f) for f in fams] for b, fams in site["covers"].items()}
        self.J = local.PreCotopology(covers, site.get("has_identities", False), site.get("composition_closed", False))
        for name, des in sorted(site["designations"].items()):
            self.designations[name] = self._designation(des)
        self.pulled = local.pullback_modules_along_F(self.ext, self.budget)

    def _designation(self, des: dict) -> local.TrivialDesignation:
        alg, ext = self.alg, self.ext
        mods: dict[str, set[str]] = {}
        ranks: dict[str, int] = {}
        for o in des["objects"]:
            R = ext.obj_map[o]
            over = [x for x in alg.Mod_c.objects() if x.R == R]
            spec = des["modules"]
            if spec == "free":
                fr = local.free_modules(alg, R)
                ranks.update(fr)
                ids = set(fr)
            elif spec == "all":
                ids = {x.id for x in over}
            elif spec == "none":
                ids = set()
            else:
                ids = {i for i in spec if any(x.id == i for x in over)}
            mods.setdefault(R.id, set()).update(ids)
        compatible = None
        if des.get("compatible") == "constant-rank":
            if des["modules"] != "free":
                raise StructuralError("constant-rank compatibility needs free trivial modules")
            compatible = local.constant_rank(ranks)
        return local.TrivialDesignation(set(des["objects"]), mods, compatible)

    def loc(self, designation: str, b: str) -> local.LocResult:
        key = (designation, b)
        if key not in self.locs:
            self.locs[key] = local.build_Loc(self.ext, self.J, self.designations[designation], b, self.pulled)
        return self.locs[key]


# ---------------------------------------------------------------------------
# Running


def _worst(statuses) -> str:
    statuses = list(statuses)
    for s in ("fail", "truncated"):
        if s in statuses:
            return s
    return "pass"


class _Runner:
    def __init__(self, session: Session):
        self.s = session
        self.stages: list[dict] = []
        self.timings: dict[str, float] = {}
        self.loc_section: dict = {}
        self.k0_section: list = []
        self.structural = False

    # one check inside a stage
    def check(self, stage: dict, name: str, fn: Callable[[], ValidationReport]) -> ValidationReport:
        t = time.perf_counter()
        try:
            rep = fn()
        except TruncationError as e:
            rep = ValidationReport(name)
            rep.truncated("universe", str(e))
        except StructuralError as e:
            rep = ValidationReport(name)
            rep.structural("structure", str(e))
        self.timings[f"{stage['stage']}/{name}"] = round(time.perf_counter() - t, 3)
        if rep.structural_errors:
            self.structural = True
        stage["checks"].append({"name": name, "status": rep.status, "report": rep.to_dict()})
        return rep

    def status_of(self, name: str) -> str | None:
        for st in self.stages:
            if st["stage"] == name:
                return st["status"]
        return None

    def run(self) -> None:
        wanted = STAGES if self.s.settings.stage is None else STAGES[:STAGES.index(self.s.settings.stage) + 1]
        for name in STAGES:
            stage = {"stage": name, "status": "skipped", "reason": None, "checks": []}
            self.stages.append(stage)
            if name not in wanted:
                stage["reason"] = f"not requested (pipeline stopped after {self.s.settings.stage})"
                continue
            reason = self.blocked(name)
            if reason is None:
                t = time.perf_counter()
                reason = getattr(self, "stage_" + name.replace("-", "_"))(stage)
                self.timings[name] = round(time.perf_counter() - t, 3)
            if reason is not None:
                stage["reason"] = reason
                stage["status"] = "skipped" if not stage["checks"] else _worst(c["status"] for c in stage["checks"])
            else:
                stage["status"] = _worst(c["status"] for c in stage["checks"])

    def blocked(self, name: str) -> str | None:
        for dep in DEPENDS[name]:
            st = self.status_of(dep)
            if st == "fail":
                return f"depends on {dep}, which failed"
            if st == "skipped":
                return f"depends on {dep}, which was skipped"
        return None

    # stages ---------------------------------------------------------------

    def stage_validate(self, stage: dict) -> None:
        s = self.s
        M = s.M
        self.check(stage, "base category", lambda: fincat.validate_category(s.base, s.budget))
        self.check(stage, "grothendieck construction", lambda: s.construction)
        cap = s.analysis.get("validate", {}).get("fibre_objects", 4)
        for b in s.base.objects():
            def fibre(b=b):
                C, _ = fincat.fibre_category(M.P, b, s.budget)
                objs = sorted(C.objects(), key=C.obj_id)
                rep = ValidationReport(f"fibre over {b}")
                rep.note(f"{len(objs)} objects")
                if len(objs) > cap:
                    rep.note(f"laws checked on the first {cap} objects in id order")
                    objs = objs[:cap]
                rep.extend(fincat.validate_category(fincat.FullSubcategory(C, objs), s.budget))
                return rep
            self.check(stage, f"fibre {b}", fibre)

        def tensor_domain():
            EE, _, _ = fincat.pullback_category(M.P, M.P)
            rep = ValidationReport("tensor domain E x_B E")
            n = len(EE.objects())
            expected = sum(len(M.objects_over(b)) ** 2 for b in s.base.objects())
            rep.checked += 1
            rep.note(f"{n} objects")
            if n != expected:
                rep.law("pullback.objects", f"{n} objects, fibre sizes give {expected}")
            return rep
        self.check(stage, "tensor domain", tensor_domain)
        if "external_base" in s.data:
            eb = s.data["external_base"]["category"]
            self.check(stage, "external base category",
                       lambda: fincat.validate_category(_category(eb, eb.get("name", "X")), s.budget))

    def _lift_args(self) -> dict:
        lu = self.s.analysis.get("lift_uniqueness", {})
        return {"alternatives": lu.get("alternatives", 3), "sample": lu.get("sample"), "seed": lu.get("seed", 0)}

    def stage_verify_opfibration(self, stage: dict) -> None:
        s = self.s
        M = s.M
        self.check(stage, "opfibration", lambda: monoidal.verify_opfibration(M.P, M.lift, s.budget, M.name))
        self.check(stage, "lift uniqueness",
                   lambda: monoidal.check_lift_uniqueness(M.P, M.lift, s.budget, name=M.name, **self._lift_args()))

    def stage_verify_monoidal(self, stage: dict) -> None:
        s = self.s
        M = s.M
        self.check(stage, "monoidal", lambda: monoidal.verify_monoidal_opfibration(M, s.budget))
        if M.symmetric:
            self.check(stage, "symmetry", lambda: monoidal.verify_symmetry(M, s.budget))
        for f in s.base.morphism_ids():
            if s.base.is_identity(f):
                continue
            self.check(stage, f"direct image {f}", lambda f=f: monoidal.direct_image_functor(M, f, s.budget).report)

    def stage_verify_modovermon(self, stage: dict) -> None:
        s = self.s
        self.check(stage, "modovermon", lambda: algebra.verify_modovermon(s.M, s.algebra(), budget=s.budget))

    def stage_build(self, stage: dict) -> None:
        s = self.s
        alg = s.algebra()
        an = s.analysis

        def tower():
            rep = ValidationReport(f"{s.M.name}: fibred algebra tower")
            for label, build in (("Mon", algebra.build_Mon), ("Comm", algebra.build_Comm),
                                 ("Mod", algebra.build_Mod), ("Mod_c", algebra.build_Mod_c)):
                C, P = build(alg)
                rep.checked += 1
                rep.note(f"{label}: {len(C.objects())} objects over {P.target.name}")
            rep.extend(alg.report)
            return rep
        self.check(stage, "tower", tower)
        limit = an.get("fibre_restriction", {}).get("compose_limit", 20000)
        for b in s.base.objects():
            self.check(stage, f"fibre restriction {b}",
                       lambda b=b: algebra.fibre_restriction_check(s.M, alg, b, compose_limit=limit))
        adj = an.get("adjunction", {})
        self.check(stage, "adjunction", lambda: algebra.verify_adjunction(
            alg, adj.get("sample"), adj.get("seed", 0), workers=s.settings.workers))
        self.check(stage, "pseudofunctoriality", lambda: algebra.verify_pseudofunctoriality(
            alg, an.get("pseudofunctoriality", {}).get("limit")))
        args = self._lift_args()
        self.check(stage, "lift uniqueness Mon", lambda: monoidal.check_lift_uniqueness(
            alg.mon_projection(), alg.monoid_lift, s.budget, name=alg.Mon.name, **args))
        self.check(stage, "lift uniqueness Mod", lambda: monoidal.check_lift_uniqueness(
            alg.mod_projection(), alg.extension_lift, s.budget, name=alg.Mod.name, **args))

    def stage_site(self, stage: dict) -> str | None:
        s = self.s
        if "external_base" not in s.data or "site" not in s.data:
            return "no external base and site in the presentation"
        rep = self.check(stage, "external base", lambda: (s.build_site(), s.ext.validate(s.budget))[1])
        if s.ext is None or s.pulled is None:
            return None if rep.structural_errors else "external base could not be built"
        self.check(stage, "pre-cotopology", lambda: s.J.validate(s.ext.B))
        for name, T in sorted(s.designations.items()):
            self.check(stage, f"designation {name}", lambda T=T: T.validate(s.ext))
        self.check(stage, "pulled-back modules", lambda: monoidal.verify_opfibration(
            s.pulled.projection, s.pulled.lift, s.budget, "pulled-back modules"))

        def objects():
            rep = ValidationReport("locally trivial objects")
            for name, T in sorted(s.designations.items()):
                for b in s.ext.B.objects():
                    ok, w = local.is_locally_trivial_object(s.ext, s.J, T, b)
                    rep.checked += 1
                    rep.note(f"{name}: {b} " + (f"covered by {list(w.family)}" if ok else "not locally trivial"))
            return rep
        self.check(stage, "locally trivial objects", objects)
        return None

    def stage_loc(self, stage: dict) -> str | None:
        s = self.s
        reqs = s.analysis.get("loc", [])
        if not reqs:
            return "no Loc requests"
        ext = s.ext
        for req in reqs:
            name = req["designation"]
            T = s.designations[name]
            section: dict = {"objects": {}, "induced": {}}
            self.loc_section[name] = section

            def build(name=name, section=section):
                rep = ValidationReport(f"Loc for {name}")
                for b in ext.B.objects():
                    L = s.loc(name, b)
                    rep.checked += 1
                    for t in L.truncated:
                        rep.truncated("loc.membership", t, b)
                    if L.warning:
                        rep.note(L.warning)
                    section["objects"][b] = {
                        "members": L.members,
                        "non_members": sorted(k for k, v in L.membership.items() if v is None),
                        "witnesses": {k: {"family": list(v.family), "images": list(v.images)}
                                      for k, v in sorted(L.membership.items()) if v is not None},
                        "warning": L.warning,
                    }
                return rep
            self.check(stage, f"Loc {name}", build)
            for f in ext.B.morphism_ids():
                if ext.B.is_identity(f):
                    continue

                def induced(f=f, name=name, T=T, section=section):
                    locs = {b: s.loc(name, b) for b in ext.B.objects()}
                    r = local.induced_functor_on_Loc(ext, s.J, T, f, s.pulled, locs)
                    rep = ValidationReport(f"induced functor along {f}")
                    rep.extend(r.report)
                    if r.functor is not None:
                        rep.extend(fincat.validate_functor(r.functor, s.budget))
                    section["induced"][f] = dict(sorted(r.images.items()))
                    return rep
                self.check(stage, f"induced {name} {f}", induced)
        return None

    def stage_k0(self, stage: dict) -> str | None:
        s = self.s
        reqs = s.analysis.get("k0", [])
        if not reqs:
            return "no K0 requests"
        for i, req in enumerate(reqs):
            entry: dict = {"request": _sorted_tree(req), "status": "skipped", "reason": None, "classes": None, "class_witnesses": None,
                           "group": None, "oracle_iso": None}
            self.k0_section.append(entry)
            label = f"K0 {req['category']} {req['object']}" + (f" {req['designation']}" if "designation" in req else "")
            try:
                C, S, coords = self._k0_inputs(req)
            except _Skip as e:
                entry["reason"] = str(e)
                continue

            def compute(C=C, S=S, coords=coords, entry=entry, req=req):
                rep = ValidationReport(label)
                rep.extend(S.validate(C, s.budget), "sum")
                classes = kzero.iso_classes(C, s.budget)
                g = kzero.group_completion(C, S, s.budget, classes)
                problem = kzero.check_smith(g.relations, g.smith, len(g.generators))
                rep.checked += 1
                if problem:
                    rep.law("smith.certificate", problem)
                entry["classes"] = [[C.obj_id(x) for x in c] for c in classes]
                # certify each class: an explicit iso from its representative
                witnesses = {}
                for c in classes:
                    for x in c[1:]:
                        isos = fincat.find_isomorphisms(C, c[0], x, s.budget)
                        rep.checked += 1
                        if not isos:
                            rep.law("k0.classes", "no isomorphism to the class representative", C.obj_id(x))
                            continue
                        witnesses[C.obj_id(x)] = C.mor_id(isos[0][0])
                entry["class_witnesses"] = witnesses
                entry["group"] = g.to_dict()
                entry["group"]["certificate"] = "verified" if problem is None else problem
                if req.get("oracle") == "coordinates":
                    iso = g.homomorphism_is_iso([coords(c[0]) for c in classes])
                    entry["oracle_iso"] = iso
                    rep.checked += 1
                    if not iso:
                        rep.law("k0.oracle", "coordinate map is not an isomorphism onto Z^n")
                return rep
            rep = self.check(stage, label, compute)
            entry["status"] = rep.status
        return None

    def _k0_inputs(self, req: dict):
        s = self.s
        if req["category"] == "fibre":
            b = req["object"]
            try:
                S = kzero.fibre_sum_designation(s.M, b)
            except StructuralError as e:
                raise _Skip(f"no sum designation: {e}") from None
            C, _ = fincat.fibre_category(s.M.P, b, s.budget)
            return C, S, lambda x: _coordinates(x[1])
        st = self.status_of("loc")
        if st in (None, "skipped", "fail") or s.ext is None:
            raise _Skip("Loc was not built (stage loc did not pass)")
        name, b = req["designation"], req["object"]
        L = s.loc(name, b)
        try:
            S = local.loc_sum_designation(s.ext, b)
        except StructuralError as e:
            raise _Skip(f"no sum designation: {e}") from None
        return L.category, S, lambda x: _coordinates(x[1].M[1])


class _Skip(Exception):
    pass


def _coordinates(x) -> list[int]:
    return list(x) if isinstance(x, tuple) else [int(x)]


def run(pres: Presentation, settings: Settings | None = None) -> dict:
    """Run the pipeline and return the report as a plain dict."""
    settings = settings or Settings()
    if settings.stage is not None and settings.stage not in STAGES:
        raise ParseError([f"--stage: unknown stage {settings.stage!r}"])
    try:
        session = Session(pres, settings)
    except StructuralError as e:
        return _report(pres, settings, [], {}, [], {}, structural=str(e))
    r = _Runner(session)
    r.run()
    return _report(pres, settings, r.stages, r.loc_section, r.k0_section, r.timings, structural=r.structural)


def _report(pres, settings, stages, loc, k0, timings, structural) -> dict:
    failures = sum(1 for st in stages for c in st["checks"] if c["status"] == "fail")
    truncs = sum(1 for st in stages for c in st["checks"] if c["status"] == "truncated")
    error = structural if isinstance(structural, str) else None
    if structural:
        code = EXIT_STRUCTURAL
    elif failures:
        code = EXIT_FAIL
    elif truncs and settings.strict:
        code = EXIT_TRUNCATED
    else:
        code = EXIT_PASS
    status = {EXIT_PASS: "truncated" if truncs else "pass", EXIT_FAIL: "fail", EXIT_STRUCTURAL: "error",
              EXIT_TRUNCATED: "truncated"}[code]
    return {
        "format": REPORT_FORMAT,
        "engine": __version__,
        "presentation": pres.name,
        "settings": {"universe_bound": settings.universe_bound, "strict": settings.strict, "stage": settings.stage},
        "stages": stages,
        "loc": loc,
        "k0": k0,
        "summary": {"status": status, "exit_code": code, "failed_checks": failures,
                    "truncated_checks": truncs, "error": error},
        "timings": timings,
    }


def serialize_report(report: dict, timings: bool = True) -> str:
    out = dict(report)
    if not timings:
        out.pop("timings", None)
    return json.dumps(out, indent=2, ensure_ascii=False) + "\n"


def human_report(report: dict) -> str:
    lines = [f"{report['presentation']}  ({report['format']}, engine {report['engine']})"]
    for st in report["stages"]:
        head = f"{st['stage']:<20} {st['status']}"
        if st["reason"]:
            head += f"  ({st['reason']})"
        lines.append(head)
        for c in st["checks"]:
            rep = c["report"]
            lines.append(f"    {c['name']:<34} {c['status']:<10} {rep['checked']} checks")
            shown = [i for i in rep["issues"] if i["kind"] != "truncated"][:3]
            for i in shown:
                lines.append(f"        {i['kind']} {i['check']}: {i['message']}  [{', '.join(i['witness'])}]")
            nt = sum(1 for i in rep["issues"] if i["kind"] == "truncated")
            if nt:
                lines.append(f"        {nt} truncation(s)")
    for name, sec in report["loc"].items():
        for b, row in sec["objects"].items():
            lines.append(f"Loc[{name}] at {b}: {len(row['members'])} of "
                         f"{len(row['members']) + len(row['non_members'])} modules")
    for e in report["k0"]:
        req = e["request"]
        where = f"{req['category']} {req['object']}" + (f" [{req['designation']}]" if "designation" in req else "")
        if e["group"] is None:
            lines.append(f"K0 {where}: {e['status']} ({e['reason']})")
        else:
            g = e["group"]
            extra = "" if e["oracle_iso"] is None else f", coordinate map iso: {e['oracle_iso']}"
            lines.append(f"K0 {where}: {g['group']} (invariant factors {g['invariant_factors']}, "
                         f"certificate {g['certificate']}{extra})")
    sm = report["summary"]
    tail = f"summary: {sm['status']} (exit {sm['exit_code']}; {sm['failed_checks']} failed, " \
           f"{sm['truncated_checks']} truncated)"
    if sm["error"]:
        tail += f"; error: {sm['error']}"
    lines.append(tail)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Diffing reports


def _key_of(item):
    if isinstance(item, dict):
        for k in ("stage", "name"):
            if k in item:
                return item[k]
        if "request" in item:
            return json.dumps(item["request"], sort_keys=True)
    return None


def _dump(v) -> str:
    return json.dumps(v, sort_keys=True, ensure_ascii=False)


def _diff(a, b, path: str, out: list[str]) -> None:
    if isinstance(a, dict) and isinstance(b, dict):
        for k in list(a) + [k for k in b if k not in a]:
            p = f"{path}.{k}" if path else k
            if k not in b:
                out.append(f"- {p}: {_dump(a[k])}")
            elif k not in a:
                out.append(f"+ {p}: {_dump(b[k])}")
            else:
                _diff(a[k], b[k], p, out)
    elif isinstance(a, list) and isinstance(b, list):
        ka, kb = [_key_of(x) for x in a], [_key_of(x) for x in b]
        if a and b and None not in ka and None not in kb and len(set(ka)) == len(ka) and len(set(kb)) == len(kb):
            ia, ib = dict(zip(ka, a)), dict(zip(kb, b))
            for k in ka + [k for k in kb if k not in ia]:
                p = f"{path}[{k}]"
                if k not in ib:
                    out.append(f"- {p}: {_dump(ia[k])}")
                elif k not in ia:
                    out.append(f"+ {p}: {_dump(ib[k])}")
                else:
                    _diff(ia[k], ib[k], p, out)
        else:
            sa, sb = [_dump(x) for x in a], [_dump(x) for x in b]
            for x in sa:
                if x not in sb:
                    out.append(f"- {path}[]: {x}")
            for x in sb:
                if x not in sa:
                    out.append(f"+ {path}[]: {x}")
    elif a != b:
        out.append(f"~ {path}: {_dump(a)} -> {_dump(b)}")


def diff_reports(a: dict, b: dict) -> str:
    """Structural difference of two reports, ignoring timings; empty if equal."""
    fa, fb = a.get("format"), b.get("format")
    if fa != fb or fa != REPORT_FORMAT:
        raise ParseError([f"format: cannot compare report versions {fa!r} and {fb!r}"])
    a = {k: v for k, v in a.items() if k != "timings"}
    b = {k: v for k, v in b.items() if k != "timings"}
    out: list[str] = []
    _diff(a, b, "", out)
    return "\n".join(out)


# ---------------------------------------------------------------------------
# Command line


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None or raw == "":
        return 1
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ParseError([f"{WORKERS_ENV}: expected a positive integer, got {raw!r}"])
    return n


def _read_report(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError([f"{path}: {e}"]) from None


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="fibredk", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run the verification pipeline on a presentation")
    r.add_argument("file", help="presentation file or bundled example name")
    r.add_argument("--universe-bound", type=int, metavar="N", help="cap every fibre universe at N")
    r.add_argument("--strict", action="store_true", help="treat truncations as failures (exit 3)")
    r.add_argument("--stage", choices=STAGES, help="stop after this stage")
    r.add_argument("--report", metavar="PATH", help="write the machine report here")
    r.add_argument("--format", choices=("human", "machine"), default="human")
    r.add_argument("--no-timings", action="store_true", help="omit the timings block")
    p = sub.add_parser("parse", help="check a presentation and print its canonical form")
    p.add_argument("file")
    d = sub.add_parser("diff", help="compare two machine reports, ignoring timings")
    d.add_argument("a")
    d.add_argument("b")
    sub.add_parser("examples", help="list the bundled examples")
    args = ap.parse_args(argv)
    try:
        if args.cmd == "examples":
            for name in bundled_examples():
                print(f"{name}\t{example_path(name)}")
            return EXIT_PASS
        if args.cmd == "parse":
            sys.stdout.write(serialize(parse(args.file)))
            return EXIT_PASS
        if args.cmd == "diff":
            text = diff_reports(_read_report(args.a), _read_report(args.b))
            if text:
                print(text)
            return EXIT_PASS if not text else EXIT_FAIL
        if args.universe_bound is not None and args.universe_bound < 1:
            raise ParseError(["--universe-bound: must be positive"])
        pres = parse(args.file)
        settings = Settings(args.universe_bound, args.strict, args.stage, _workers())
        report = run(pres, settings)
    except ParseError as e:
        for line in e.errors:
            print(f"error: {line}", file=sys.stderr)
        return EXIT_STRUCTURAL
    text = serialize_report(report, timings=not args.no_timings)
    if args.report:
        Path(args.report).write_text(text)
    sys.stdout.write(text if args.format == "machine" else human_report(report))
    return report["summary"]["exit_code"]


if __name__ == "__main__":
    sys.exit(main())


__all__ = ["ParseError", "Presentation", "Settings", "parse", "parse_text", "serialize", "run", "diff_reports",
           "serialize_report", "human_report", "main", "schema", "bundled_examples", "example_path", "STAGES"]
