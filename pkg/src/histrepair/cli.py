"""Command-line entry point.

Subcommands: study (blame availability), context (heuristic payload +
prompt preview), repair (one bug, one config), batch (the full
campaign), report (metrics over a records directory).

Exit codes: 0 success, 2 usage/configuration error, 4 a repair run
terminated by a guard or failed its tests, 3 any other domain error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from . import blame as blame_mod
from . import loop as loop_mod
from . import metrics as metrics_mod
from . import sandbox as sb
from .bugs import BugRecord, fix_patch_from_diff, load_manifest
from .config import CampaignConfig, load_campaign, make_provider
from .context import (
    HEURISTICS,
    TemplateSet,
    build_context,
    render_prompts,
    save_context,
)
from .errors import (
    ConfigError,
    EmptyScope,
    FnPairUnavailable,
    HistRepairError,
    NotFound,
    UniverseMismatch,
)
from .patches import parse_unified_diff

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_GUARD = 4

# the path the agent is told the project lives at; stable per backend
# so transcripts replay byte-identically across provisioned worktrees
AGENT_REPO_PATH = {"local": ".", "container": "/work"}


def _find_record(cfg: CampaignConfig, bug_id: str) -> BugRecord:
    for rec in load_manifest(cfg.manifest):
        if rec.spec.bug_id == bug_id:
            return rec
    raise NotFound(f"bug {bug_id!r} is not in the manifest")


def _templates(cfg: CampaignConfig) -> TemplateSet:
    if cfg.template_dir is not None:
        return TemplateSet.from_dir(cfg.template_dir)
    return TemplateSet.default()


def prepare_bundle(cfg: CampaignConfig, rec: BugRecord, heuristic: str):
    """Blame, extract, truncate and render for one (bug, heuristic).

    Returns (bundle, context-or-None). A fn_pair that cannot anchor
    degrades to a notice line instead of failing the run.
    """
    repo_path = AGENT_REPO_PATH.get(cfg.backend, ".")
    templates = _templates(cfg)
    if heuristic == "non_history":
        bundle = render_prompts(
            rec.spec, None, templates,
            repo_path=repo_path, sentinel=cfg.sentinel,
        )
        return bundle, None
    summary = blame_mod.summarize_blame(rec.repo_path, rec.spec)
    anchor = next(
        (e for e in summary.entries if e.commit_id == summary.resolved_commit),
        None,
    )
    try:
        ctx = build_context(
            rec.repo_path, heuristic, summary.resolved_commit,
            entry=anchor, language=cfg.language, budgets=cfg.budgets,
        )
    except FnPairUnavailable as exc:
        bundle = render_prompts(
            rec.spec, None, templates,
            repo_path=repo_path, sentinel=cfg.sentinel,
            history_note=f"historical context unavailable: {exc}",
        )
        return bundle, None
    bundle = render_prompts(
        rec.spec, ctx, templates,
        repo_path=repo_path, sentinel=cfg.sentinel,
    )
    return bundle, ctx


def record_is_complete(path: Path) -> bool:
    if not path.exists():
        return False
    try:
        lines = [l for l in path.read_text().splitlines() if l.strip()]
        return bool(lines) and json.loads(lines[-1]).get("type") == "result"
    except (json.JSONDecodeError, OSError):
        return False


def run_one_job(cfg: CampaignConfig, rec: BugRecord,
                heuristic: str) -> loop_mod.RunRecord:
    """One full repair: provision, loop, persist record and artifacts."""
    bug_id = rec.spec.bug_id
    # provider and prompts come first: a configuration problem must
    # surface before any sandbox exists
    provider = make_provider(cfg.provider, bug_id, heuristic)
    bundle, ctx = prepare_bundle(cfg, rec, heuristic)

    context_dir = cfg.out_dir / "context"
    context_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{bug_id}__{heuristic}"
    (context_dir / f"{stem}.system.txt").write_text(bundle.system_prompt)
    (context_dir / f"{stem}.user.txt").write_text(bundle.user_prompt)
    if ctx is not None:
        save_context(ctx, context_dir / f"{stem}.context.json")

    handle = sb.provision(
        bug_id, rec.repo_path, rec.spec.snapshot_ref,
        cfg.adapter, backend=cfg.backend,
    )
    try:
        harness = loop_mod.LoopHarness(
            provider=provider,
            pricing=cfg.provider.pricing_table(),
            model=cfg.provider.model,
            guards=cfg.guards,
            sentinel=cfg.sentinel,
        )
        record = loop_mod.run(
            bug_id, heuristic,
            bundle.system_prompt, bundle.user_prompt, handle, harness,
        )
    finally:
        sb.teardown(handle, cfg.out_dir / "artifacts" / stem)
    records_dir = cfg.out_dir / "records"
    loop_mod.write_run_record(record, records_dir / loop_mod.record_filename(bug_id, heuristic))
    return record


def _load_categories(cfg: CampaignConfig) -> dict[str, str]:
    from .bugs import categorize_bug
    categories = {}
    for rec in load_manifest(cfg.manifest):
        if rec.fix_patch_path is None:
            raise ConfigError(
                f"bug {rec.spec.bug_id} has no fix_patch_path; "
                "the report needs it for categorization"
            )
        patch = parse_unified_diff(rec.fix_patch_path.read_text())
        categories[rec.spec.bug_id] = categorize_bug(fix_patch_from_diff(patch))
    return categories


def rows_from_records(records_dir: Path,
                      categories: dict[str, str]) -> list[metrics_mod.OutcomeRow]:
    rows = []
    for path in sorted(records_dir.glob("*.jsonl")):
        record = loop_mod.load_run_record(path)
        if record.bug_id not in categories:
            raise ConfigError(f"record {path.name}: bug not in manifest")
        rows.append(metrics_mod.OutcomeRow(
            bug_id=record.bug_id,
            category=categories[record.bug_id],
            config=record.config,
            passed=record.tests_passed_at_end,
            steps=record.steps_taken,
            cost=record.total_cost,
            termination=record.termination,
        ))
    if not rows:
        raise EmptyScope(f"no run records in {records_dir}")
    return rows


# ---------------------------------------------------------------------------
# subcommands

def cmd_study(cfg: CampaignConfig, out: Path | None) -> int:
    records = load_manifest(cfg.manifest)
    patches = {}
    for rec in records:
        if rec.fix_patch_path is not None and rec.fix_patch_path.exists():
            parsed = parse_unified_diff(rec.fix_patch_path.read_text())
            patches[rec.spec.bug_id] = fix_patch_from_diff(parsed)
    report = blame_mod.run_availability_study(records, patches)
    out_dir = out or (cfg.out_dir / "study")
    blame_mod.write_study_outputs(report, out_dir)
    cfg.freeze_into(out_dir)
    print(blame_mod.render_availability_table(report), end="")
    if report.dataset_size and len(report.exclusions) * 10 > report.dataset_size:
        print(
            f"error: {len(report.exclusions)} of {report.dataset_size} bugs "
            "excluded (>10%)", file=sys.stderr,
        )
        return EXIT_DOMAIN
    return EXIT_OK


def cmd_context(cfg: CampaignConfig, bug_id: str, heuristic: str,
                out: Path | None) -> int:
    if heuristic not in HEURISTICS:
        raise ConfigError(f"unknown heuristic {heuristic!r}")
    rec = _find_record(cfg, bug_id)
    bundle, ctx = prepare_bundle(cfg, rec, heuristic)
    out_dir = out or (cfg.out_dir / "context")
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{bug_id}__{heuristic}"
    (out_dir / f"{stem}.system.txt").write_text(bundle.system_prompt)
    (out_dir / f"{stem}.user.txt").write_text(bundle.user_prompt)
    if ctx is not None:
        save_context(ctx, out_dir / f"{stem}.context.json")
    cfg.freeze_into(out_dir)
    print(f"token estimate: {bundle.token_estimate}")
    return EXIT_OK


def cmd_repair(cfg: CampaignConfig, bug_id: str, heuristic: str) -> int:
    if heuristic not in cfg.configs:
        raise ConfigError(
            f"heuristic {heuristic!r} is not among campaign configs {cfg.configs}"
        )
    rec = _find_record(cfg, bug_id)
    cfg.freeze_into(cfg.out_dir)
    record = run_one_job(cfg, rec, heuristic)
    path = cfg.out_dir / "records" / loop_mod.record_filename(bug_id, heuristic)
    print(path)
    if record.tests_passed_at_end:
        return EXIT_OK
    print(f"run terminated: {record.termination}", file=sys.stderr)
    return EXIT_GUARD


def cmd_batch(cfg: CampaignConfig) -> int:
    from concurrent.futures import ThreadPoolExecutor

    records = load_manifest(cfg.manifest)
    cfg.freeze_into(cfg.out_dir)
    records_dir = cfg.out_dir / "records"
    jobs = []
    skipped = 0
    for rec in records:
        for heuristic in cfg.configs:
            path = records_dir / loop_mod.record_filename(rec.spec.bug_id, heuristic)
            if record_is_complete(path):
                skipped += 1
                continue
            jobs.append((rec, heuristic))

    failures: list[tuple[str, str, str]] = []
    done = 0

    def one(job):
        rec, heuristic = job
        try:
            record = run_one_job(cfg, rec, heuristic)
            return (rec.spec.bug_id, heuristic, record.termination, None)
        except Exception as exc:
            return (rec.spec.bug_id, heuristic, "", f"{type(exc).__name__}: {exc}")

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        for bug_id, heuristic, termination, error in pool.map(one, jobs):
            done += 1
            if error is not None:
                failures.append((bug_id, heuristic, error))
                print(f"[{done}/{len(jobs)}] {bug_id} {heuristic}: FAILED {error}")
            else:
                print(f"[{done}/{len(jobs)}] {bug_id} {heuristic}: {termination}")

    print(f"batch complete: {done} run, {skipped} skipped (already complete), "
          f"{len(failures)} failed")
    for bug_id, heuristic, error in failures:
        print(f"  failed: {bug_id} {heuristic}: {error}", file=sys.stderr)
    return EXIT_OK


def cmd_report(cfg: CampaignConfig, records_dir: Path | None,
               out: Path | None) -> int:
    records_dir = records_dir or (cfg.out_dir / "records")
    categories = _load_categories(cfg)
    rows = rows_from_records(records_dir, categories)
    out_dir = out or (cfg.out_dir / "report")
    paths = metrics_mod.export_report(rows, out_dir)
    cfg.freeze_into(out_dir)
    print(Path(paths["table"]).read_text(), end="")
    print(Path(paths["stats"]).read_text(), end="")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="histrepair",
        description="History-aware automated program repair toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="campaign YAML file")
        p.add_argument("--out", default=None, help="output directory override")

    p_study = sub.add_parser("study", help="blame availability study")
    add_common(p_study)

    p_context = sub.add_parser("context", help="build context and prompts for one bug")
    add_common(p_context)
    p_context.add_argument("--bug", required=True)
    p_context.add_argument("--heuristic", required=True, choices=HEURISTICS)

    p_repair = sub.add_parser("repair", help="repair one bug under one config")
    p_repair.add_argument("--config", required=True)
    p_repair.add_argument("--bug", required=True)
    p_repair.add_argument("--heuristic", required=True, choices=HEURISTICS)

    p_batch = sub.add_parser("batch", help="run the full campaign")
    p_batch.add_argument("--config", required=True)
    p_batch.add_argument("--workers", type=int, default=None)
    p_batch.add_argument("--out", default=None)

    p_report = sub.add_parser("report", help="aggregate records into reports")
    p_report.add_argument("--config", required=True)
    p_report.add_argument("--records-dir", default=None)
    p_report.add_argument("--out", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = {}
        if getattr(args, "out", None):
            overrides["out_dir"] = args.out
        if getattr(args, "workers", None):
            overrides["workers"] = args.workers
        cfg = load_campaign(args.config, overrides)
        if args.command == "study":
            return cmd_study(cfg, Path(args.out) if args.out else None)
        if args.command == "context":
            return cmd_context(
                cfg, args.bug, args.heuristic,
                Path(args.out) if args.out else None,
            )
        if args.command == "repair":
            return cmd_repair(cfg, args.bug, args.heuristic)
        if args.command == "batch":
            return cmd_batch(cfg)
        if args.command == "report":
            return cmd_report(
                cfg,
                Path(args.records_dir) if args.records_dir else None,
                Path(args.out) if args.out else None,
            )
        parser.error(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NotFound, EmptyScope, UniverseMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except HistRepairError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except Exception as exc:  # unexpected: show the trace, fail as domain
        traceback.print_exc()
        print(f"unexpected error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
