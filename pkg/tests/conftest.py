"""Shared fixtures.

Every operation listed in ``coverage_manifest.json`` is wrapped in a call
counter for the whole session, so the corpus runs below double as the
coverage manifest check.  Corpus runs and the expensive engine objects are
built once per session.
"""
from __future__ import annotations

import functools
import importlib
import json
import sys
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import pytest

from fibredk import cli

HERE = Path(__file__).parent
MANIFEST = json.loads((HERE / "coverage_manifest.json").read_text())
CALLS: Counter = Counter()


def _install_counters() -> None:
    for ops in MANIFEST.values():
        for modname, names in ops.items():
            mod = importlib.import_module(modname)
            for name in names:
                original = getattr(mod, name)
                if getattr(original, "__counted__", False):
                    continue

                @functools.wraps(original)
                def counted(*args, __f=original, __k=f"{modname}.{name}", **kw):
                    CALLS[__k] += 1
                    return __f(*args, **kw)

                counted.__counted__ = True
                # rebind every module-level alias so internal calls are counted too
                for m in list(sys.modules.values()):
                    if getattr(m, "__name__", "").startswith("fibredk"):
                        for attr, val in list(vars(m).items()):
                            if val is original:
                                setattr(m, attr, counted)


_install_counters()


@dataclass
class CorpusRun:
    presentation: cli.Presentation
    report: dict
    calls: Counter


_RUNS: dict[str, CorpusRun] = {}


def corpus_run(name: str) -> CorpusRun:
    """Parse and run a bundled example once per session, recording calls."""
    if name not in _RUNS:
        before = Counter(CALLS)
        pres = cli.parse(name)
        report = cli.run(pres)
        assert cli.diff_reports(report, report) == ""
        _RUNS[name] = CorpusRun(pres, report, CALLS - before)
    return _RUNS[name]


@pytest.fixture(scope="session")
def corpus():
    return corpus_run


# engine objects -------------------------------------------------------------


@functools.cache
def z6_engine():
    from fibredk.algebra import AlgebraConfig, FibredAlgebra
    from fibredk.backends.modules import ModuleIndexed, ring_base
    from fibredk.monoidal import grothendieck_construction

    rings = {"Z6": 6, "Z2": 2, "Z3": 3}
    base = ring_base(rings, {"q2": ("Z6", "Z2"), "q3": ("Z6", "Z3")})
    M, _ = grothendieck_construction(ModuleIndexed(base, rings, 36), "z6")
    return M, FibredAlgebra(M, AlgebraConfig(monoid_bound=6, monoid_max_dim=1))


@functools.cache
def finset_engine():
    from fibredk.algebra import AlgebraConfig, FibredAlgebra
    from fibredk.backends import finset_indexed
    from fibredk.monoidal import grothendieck_construction

    M, _ = grothendieck_construction(finset_indexed(4))
    return M, FibredAlgebra(M, AlgebraConfig(monoid_bound=3))


@functools.cache
def z6_session():
    s = cli.Session(cli.parse("z6-cover"), cli.Settings())
    s.build_site()
    return s


@pytest.fixture(scope="session")
def z6():
    return z6_engine()


@pytest.fixture(scope="session")
def finset():
    return finset_engine()


# acceptance summary -----------------------------------------------------------

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_acceptance(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (ok, detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
