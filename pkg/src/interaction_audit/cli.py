"""Command-line front end.

Exit status: 0 clean, 1 audit findings (undisclosed collection), 2 operational error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .dcm import SignatureError, load_signatures
from .factcheck import FactCheckError, corpus_stats, fact_check, render_stats_table
from .ingest import AppModel, IngestError, load_app
from .linker import DEFAULT_DEPTH, LinkGraph, build_link_graph, load_tables
from .model import CollectionEvidence
from .policy import PolicyError, extract_claims, load_lexicon, load_policy
from .report import (
    AuditReport,
    file_digest,
    render_claim_text,
    render_evidence_text,
    render_report_text,
    tree_digest,
)

EXIT_CLEAN, EXIT_FINDINGS, EXIT_ERROR = 0, 1, 2


class OperationalError(Exception):
    pass


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _claim(args, app_id: str | None = None):
    lexicon = load_lexicon(args.lexicon)
    document = load_policy(args.policy)
    app_id = app_id or args.app_id or Path(args.policy).stem
    return extract_claims(document, lexicon, app_id)


def _graph(args) -> tuple[AppModel, LinkGraph]:
    if args.depth < 0:
        raise OperationalError("--depth must be >= 0")
    app = load_app(args.app)
    db = load_signatures(args.signatures)
    tables = load_tables(args.tables) if args.tables else None
    return app, build_link_graph(app, db, args.depth, tables)


def _diagnostics(app: AppModel, graph: LinkGraph) -> tuple[str, ...]:
    return tuple(str(d) for d in (*app.warnings, *graph.diagnostics))


def cmd_claims(args) -> int:
    claim = _claim(args)
    _emit(args, json.dumps(claim.to_dict(), indent=2) + "\n" if args.json else render_claim_text(claim))
    return EXIT_CLEAN


def cmd_evidence(args) -> int:
    app, graph = _graph(args)
    evidence = graph.evidence
    diagnostics = _diagnostics(app, graph)
    if args.json:
        _emit(args, json.dumps(evidence.to_dict(), indent=2) + "\n")
        if args.diagnostics:
            sys.stderr.writelines(f"{d}\n" for d in diagnostics)
    else:
        text = render_evidence_text(evidence)
        if args.diagnostics and diagnostics:
            text += "diagnostics:\n" + "".join(f"  {d}\n" for d in diagnostics)
        _emit(args, text)
    return EXIT_CLEAN


def build_report(args) -> AuditReport:
    t0 = time.perf_counter()
    app, graph = _graph(args)
    t1 = time.perf_counter()
    claim = _claim(args, app.app_id)
    t2 = time.perf_counter()
    result = fact_check(claim, graph.evidence)
    t3 = time.perf_counter()
    inputs = {"app": tree_digest(args.app), "policy": file_digest(args.policy)}
    for name in ("signatures", "lexicon", "tables"):
        if getattr(args, name):
            inputs[name] = file_digest(getattr(args, name))
    return AuditReport(
        app_id=app.app_id,
        claim=claim,
        evidence=graph.evidence,
        fact_check=result,
        diagnostics=_diagnostics(app, graph),
        inputs=inputs,
        timing={"evidence_s": t1 - t0, "claims_s": t2 - t1, "fact_check_s": t3 - t2},
    )


def cmd_audit(args) -> int:
    report = build_report(args)
    if args.json:
        _emit(args, report.to_json())
    else:
        _emit(args, render_report_text(report, diagnostics=args.diagnostics))
    return EXIT_FINDINGS if report.has_findings else EXIT_CLEAN


def _load_evidence_file(path: Path) -> CollectionEvidence:
    data = json.loads(path.read_text(encoding="utf-8"))
    if "version" in data and "evidence" in data:  # a full audit report
        data = data["evidence"]
    return CollectionEvidence.from_dict(data)


def cmd_corpus_stats(args) -> int:
    directory = Path(args.directory)
    if not directory.is_dir():
        raise OperationalError(f"{directory} is not a directory")
    files = sorted(directory.glob("*.json"))
    if not files:
        raise OperationalError(f"no evidence JSON files in {directory}")
    try:
        evidences = [_load_evidence_file(p) for p in files]
    except (KeyError, TypeError) as exc:
        raise OperationalError(f"malformed evidence file: {exc}") from exc
    stats = corpus_stats(evidences)
    _emit(args, json.dumps(stats.to_dict(), indent=2) + "\n" if args.json else render_stats_table(stats))
    return EXIT_CLEAN


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="interaction-audit",
        description="Fact-check privacy-policy claims about user interaction data against app code.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--json", action="store_true", help="emit JSON instead of text")
        p.add_argument("--out", help="write output to this file")

    def policy_opts(p):
        p.add_argument("--policy", required=True, help="privacy policy (.txt or .html)")
        p.add_argument("--lexicon", help="lexicon JSON overriding the bundled one")

    def app_opts(p):
        p.add_argument("--app", required=True, help="apktool output directory")
        p.add_argument("--signatures", help="DCM signature DB (default: $INTERACTION_AUDIT_SIGNATURES or bundled)")
        p.add_argument("--depth", type=int, default=DEFAULT_DEPTH, help="call depth for DCM reachability")
        p.add_argument("--tables", help="widget/callback tables JSON overriding the bundled one")
        p.add_argument("--diagnostics", action="store_true", help="include ingest and linking diagnostics")

    p = sub.add_parser("claims", help="extract the standardized collection claim from a policy")
    policy_opts(p)
    p.add_argument("--app-id", help="app id recorded in the claim (default: policy file stem)")
    common(p)
    p.set_defaults(func=cmd_claims)

    p = sub.add_parser("evidence", help="extract collection evidence from a decoded app")
    app_opts(p)
    common(p)
    p.set_defaults(func=cmd_evidence)

    p = sub.add_parser("audit", help="fact-check a policy against an app")
    app_opts(p)
    policy_opts(p)
    common(p)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("corpus-stats", help="aggregate a directory of evidence JSON files")
    p.add_argument("directory")
    common(p)
    p.set_defaults(func=cmd_corpus_stats)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        OSError,
        IngestError,
        PolicyError,
        SignatureError,
        FactCheckError,
        OperationalError,
        json.JSONDecodeError,
        UnicodeDecodeError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
