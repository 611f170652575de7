"""Acceptance criteria, one test each; every test records a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` or ``python3 tests/test_acceptance.py``.
"""

import json
import subprocess
import sys
import time
from pathlib import Path

import jsonschema
from conftest import ACCEPTANCE_LINES, APPS, APP_NAMES, FIXTURES

from interaction_audit.cli import main
from interaction_audit.dcm import load_signatures, scan_app
from interaction_audit.factcheck import check_sets, corpus_stats
from interaction_audit.ingest import load_app
from interaction_audit.linker import extract_evidence
from interaction_audit.model import CollectionTechnique as Q, InteractionDataType as T
from interaction_audit.policy import corpus_claim_stats, extract_sentences, load_lexicon, load_policy, match_sentence
from interaction_audit.report import report_schema
from oracles import scan_signature_sites
from synthetic import corpus

TESTS = Path(__file__).parent


def report(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def test_1_fact_check_table():
    rows = json.loads((FIXTURES / "factcheck_table.json").read_text())["rows"]
    start = time.perf_counter()
    wrong = []
    for row in rows:
        shown_t, shown_q = set(map(T, row["shown_types"])), set(map(Q, row["shown_techniques"]))
        red, blue = set(map(T, row["red"])), set(map(Q, row["blue"]))
        r = check_sets(row["app"], shown_t - red, shown_q - blue, shown_t, shown_q)
        if r.missing_types != red or r.missing_techniques != blue:
            wrong.append(row["app"])
    elapsed = time.perf_counter() - start
    ok = len(rows) == 10 and not wrong and elapsed < 1.0
    report(1, "fact-check rows", ok, f"{len(rows) - len(wrong)}/{len(rows)} rows exact in {elapsed:.4f} s")
    assert ok, wrong


def test_2_yr_checked_claim():
    expected = (
        "We collect the following types of user interaction data: app presentation, binary and "
        "categorical interactions, and user input interactions, along with their frequency."
    )
    evidence = extract_evidence(load_app(APPS / "yr"), load_signatures())
    # the target claim discloses every evidenced item, so claimed == evidenced
    r = check_sets(evidence.app_id, evidence.evidenced_types, evidence.evidenced_techniques,
                   evidence.evidenced_types, evidence.evidenced_techniques)
    ok = r.checked_claim_text == expected
    report(2, "Yr checked claim", ok, "byte-exact" if ok else repr(r.checked_claim_text))
    assert ok


def test_3_policy_extractor_quality():
    root = FIXTURES / "policies"
    annotations = json.loads((root / "annotations.json").read_text())
    lexicon = load_lexicon()
    start = time.perf_counter()
    found = total = verb_tp = verb_fp = 0
    for name, entry in annotations.items():
        matched = {e.sentence.text: e for e in extract_sentences(load_policy(root / name), lexicon)}
        gold = {r["sentence"]: set(r["verbs"]) for r in entry["relevant"]}
        total += len(gold)
        found += sum(s in matched for s in gold)
        for text, e in matched.items():
            for verb in e.matched_verbs:
                if verb in gold.get(text, ()):
                    verb_tp += 1
                else:
                    verb_fp += 1
    elapsed = time.perf_counter() - start
    recall, precision = found / total, verb_tp / (verb_tp + verb_fp)
    ok = len(annotations) >= 40 and total >= 50 and recall >= 0.90 and precision >= 0.80 and elapsed < 5
    report(3, "policy extractor quality", ok,
           f"{len(annotations)} policies, {total} relevant sentences, recall {recall:.3f}, "
           f"verb precision {precision:.3f}, {elapsed:.2f} s")
    assert ok


def test_4_sentence_classification_fractions():
    rows = json.loads((FIXTURES / "sentence_classes.json").read_text())
    lexicon = load_lexicon()
    extracted = [match_sentence(r["sentence"], lexicon) for r in rows]
    fractions = corpus_claim_stats([e for e in extracted if e is not None])
    target = (0.37, 0.41, 0.22)
    ok = all(abs(a - b) <= 1e-9 for a, b in zip(fractions, target))
    report(4, "sentence classification fractions", ok,
           f"Both/TechniquesOnly/TypesOnly = {tuple(round(f, 12) for f in fractions)} vs {target}")
    assert ok


def test_5_corpus_statistics():
    stats = corpus_stats(corpus())
    p, b = stats[T.PRESENTATION], stats[T.BINARY]
    ok = p.percent_collected == 0.9 and p.avg_distinct_dcms == 13 / 9 and b.avg_distinct_dcms == 1.25
    report(5, "corpus statistics", ok,
           f"Presentation percent_collected {p.percent_collected}, avg_distinct_dcms {p.avg_distinct_dcms:.6f} (13/9)")
    assert ok


def test_6_oracle_equivalence():
    db = load_signatures()
    discrepancies, sites = [], 0
    for name in APP_NAMES:
        pipeline = sorted((m.site.class_name, m.site.line) for m in scan_app(load_app(APPS / name), db))
        oracle = scan_signature_sites(APPS / name, db.signatures)
        sites += len(oracle)
        if pipeline != oracle:
            discrepancies.append((name, pipeline, oracle))
    ok = not discrepancies
    report(6, "oracle equivalence", ok, f"{len(APP_NAMES)} apps, {sites} DCM sites, {len(discrepancies)} discrepancies")
    assert ok, discrepancies


def test_7_property_suites():
    start = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", str(TESTS / "test_properties.py")],
        capture_output=True, text=True, cwd=TESTS.parent,
    )
    elapsed = time.perf_counter() - start
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0 and elapsed < 10
    report(7, "property suites", ok, f"{summary} (wall {elapsed:.2f} s including interpreter start)")
    assert ok, proc.stdout


def test_8_end_to_end(capsys, tmp_path):
    args = ["audit", "--app", str(APPS / "minimal"), "--policy", str(APPS / "minimal" / "policy.txt")]
    code_text = main(args)
    text = capsys.readouterr().out
    out = tmp_path / "report.json"
    code_json = main(args + ["--json", "--out", str(out)])
    data = json.loads(out.read_text())
    try:
        jsonschema.validate(data, report_schema())
        valid = True
    except jsonschema.ValidationError:
        valid = False
    ok = (
        code_text == code_json == 1
        and "[missing: binary]" in text
        and "[missing: frequency]" not in text
        and data["fact_check"]["missing_types"] == ["Binary"]
        and valid
    )
    report(8, "end-to-end audit", ok, f"exit {code_text}, [missing: binary] reported, schema valid={valid}")
    assert ok


if __name__ == "__main__":
    import pytest

    sys.exit(pytest.main([__file__, "-q", "-s"]))
