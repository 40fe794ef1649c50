"""Every operation in the coverage manifest is exercised by the corpus runs."""
from __future__ import annotations

import importlib
from collections import Counter

from conftest import MANIFEST, corpus_run
from fibredk import cli


def test_manifest_names_real_operations():
    for ops in MANIFEST.values():
        for modname, names in ops.items():
            mod = importlib.import_module(modname)
            for name in names:
                assert callable(getattr(mod, name)), f"{modname}.{name}"


def test_corpus_runs_cover_the_manifest():
    total: Counter = Counter()
    for name in cli.bundled_examples():
        total += corpus_run(name).calls
    missing = [f"{mod}.{op}" for ops in MANIFEST.values() for mod, names in ops.items() for op in names
               if total[f"{mod}.{op}"] == 0]
    assert missing == []
