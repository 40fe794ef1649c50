"""End-to-end acceptance over the bundled corpus.

Each test records one pass/fail line; the lines are printed as they are
recorded and again in the terminal summary.
"""
from __future__ import annotations

import re

from conftest import corpus_run, record_acceptance
from fibredk import cli
from fibredk.algebra import fibre_monoid_morphisms
from fibredk.fincat import TruncationError

from oracles import extension_agreement, z6_invariant_factors

MUTANT_WITNESS = {
    "z6-mutant-assoc": "assoc[Z6:[1,0], Z6:[1,0], Z6:[1,0]]",
    "z6-mutant-cleavage": "cleavage[q2, Z6:[1,0]]",
    "z6-mutant-unit": "unit[q2]",
}


def _stage(report, name):
    return next(s for s in report["stages"] if s["stage"] == name)


def _check(report, stage, name):
    return next(c for c in _stage(report, stage)["checks"] if c["name"] == name)


def _checks(report, stage, prefix):
    return [c for c in _stage(report, stage)["checks"] if c["name"].startswith(prefix)]


def _failures(check) -> int:
    return sum(i["kind"] == "law" for i in check["report"]["issues"])


def _clean(check) -> bool:
    return check["status"] in ("pass", "truncated") and _failures(check) == 0


def test_criterion_1_z6_checks_and_mutants():
    run = corpus_run("z6-cover")
    names = [("verify-opfibration", "opfibration"), ("verify-monoidal", "monoidal"), ("verify-monoidal", "symmetry")]
    checks = [_check(run.report, s, n) for s, n in names]
    seconds = sum(run.report["timings"][f"{s}/{n}"] for s, n in names)
    ok = all(_clean(c) for c in checks) and seconds < 120
    details = [f"z6 checks clean in {seconds:.1f}s"]
    for mutant, witness in MUTANT_WITNESS.items():
        rep = corpus_run(mutant).report
        named = any(witness in w or witness in i["message"]
                    for s in rep["stages"] for c in s["checks"] for i in c["report"]["issues"]
                    if i["kind"] == "law" for w in i["witness"] or [""])
        rejected = rep["summary"]["exit_code"] == 1 and named
        ok &= rejected
        details.append(f"{mutant} {'rejected' if rejected else 'NOT rejected'}")
    record_acceptance(1, ok, "; ".join(details))
    assert ok


def test_criterion_2_modovermon_and_extension_oracle(finset):
    z6 = corpus_run("z6-cover").report
    fs = corpus_run("finset-terminal").report
    mods = [_check(z6, "verify-modovermon", "modovermon"), _check(fs, "verify-modovermon", "modovermon")]
    M, alg = finset
    pairs = [(phi, x) for phi in fibre_monoid_morphisms(alg) for x in alg.Mod.objects() if x.R == phi.src]
    inside, expected, bad = extension_agreement(pairs, M.unembed, alg.extension, 4, TruncationError)
    ok = all(_clean(c) for c in mods) and not bad and inside == expected > 0
    record_acceptance(2, ok, f"modovermon clean on z6 and finset; extension agrees on {inside - len(bad)}/{expected} "
                             "in-universe pairs")
    assert ok


def test_criterion_3_fibre_restriction_everywhere():
    counts = []
    ok = True
    for name in ("z6-cover", "finset-terminal", "f2-vect"):
        run = corpus_run(name)
        checks = _checks(run.report, "build", "fibre restriction")
        bases = {c["name"].removeprefix("fibre restriction ") for c in checks}
        ok &= bases == set(run.presentation.data["base"]["objects"]) and all(_clean(c) for c in checks)
        counts.append(f"{name} {len(checks)}")
    record_acceptance(3, ok, "fibre restriction holds at every base object (" + ", ".join(counts) + ")")
    assert ok


def test_criterion_4_adjunction_counts():
    fs = _check(corpus_run("finset-terminal").report, "build", "adjunction")
    z6 = _check(corpus_run("z6-cover").report, "build", "adjunction")
    exhaustive = not any("sampled" in n for n in fs["report"]["notes"])
    ok = _clean(fs) and exhaustive and _clean(z6) and z6["report"]["checked"] >= 50
    record_acceptance(4, ok, f"finset exhaustive ({fs['report']['checked']} triples), "
                             f"z6 sampled ({z6['report']['checked']} triples)")
    assert ok


def _rank(member: str) -> tuple[int, int]:
    a, b = re.match(r"Z6:\[(\d+),(\d+)\]", member).groups()
    return int(a), int(b)


def test_criterion_5_loc_membership():
    loc = corpus_run("z6-cover").report["loc"]
    free = loc["free"]["objects"]["X"]
    const = loc["free-constant-rank"]["objects"]["X"]
    everything = free["members"] + free["non_members"]
    ok = len(free["members"]) == len(everything) == 14
    # Z2^a + Z3^b is free over Z6 exactly when every invariant factor is 6
    expected = {m for m in everything if set(z6_invariant_factors(*_rank(m))) <= {6}}
    ok &= set(const["members"]) == expected and all(a == b for a, b in map(_rank, const["members"]))
    record_acceptance(5, ok, f"free: {len(free['members'])}/14 in Loc; constant rank: "
                             f"{sorted(map(_rank, const['members']))} match the invariant-factor oracle")
    assert ok


def test_criterion_6_k0():
    f2 = corpus_run("f2-vect").report["k0"][0]
    z6 = corpus_run("z6-cover").report["k0"]
    entries = [f2, *z6, *corpus_run("finset-terminal").report["k0"]]
    z6_free = next(e for e in z6 if e["request"].get("designation") == "free")
    ok = (f2["group"]["group"] == "Z" and f2["oracle_iso"] is True
          and z6_free["group"]["group"] == "Z + Z" and z6_free["oracle_iso"] is True
          and all(e["status"] == "pass" and e["group"]["certificate"] == "verified" for e in entries))
    record_acceptance(6, ok, f"f2-vect K0 = {f2['group']['group']} (dim iso {f2['oracle_iso']}), "
                             f"z6 Loc K0 = {z6_free['group']['group']}, {len(entries)} SNF certificates verified")
    assert ok


def test_criterion_7_pseudofunctoriality_and_lift_uniqueness():
    ok = True
    for name in ("z6-cover", "finset-terminal"):
        rep = corpus_run(name).report
        checks = [_check(rep, "build", "pseudofunctoriality"), _check(rep, "verify-opfibration", "lift uniqueness"),
                  _check(rep, "build", "lift uniqueness Mon"), _check(rep, "build", "lift uniqueness Mod")]
        ok &= all(_clean(c) for c in checks)
    record_acceptance(7, ok, "pseudofunctoriality and lift uniqueness on z6-cover and finset-terminal")
    assert ok


def test_criterion_8_determinism_and_round_trip():
    first = corpus_run("z6-cover").report
    again = cli.run(cli.parse("z6-cover"))
    same = cli.serialize_report(first, timings=False) == cli.serialize_report(again, timings=False)
    same &= cli.diff_reports(first, again) == ""
    trips = 0
    for name in cli.bundled_examples():
        pres = cli.parse(name)
        text = cli.serialize(pres)
        trips += cli.parse_text(text) == pres and cli.serialize(cli.parse_text(text)) == text
    ok = same and trips == len(cli.bundled_examples())
    record_acceptance(8, ok, f"z6-cover reruns byte-identical: {same}; round-trip {trips}/{len(cli.bundled_examples())}")
    assert ok
