"""Blame resolution: map each bug to the historical commit that explains it.

For lines the fix modifies or deletes, the explaining commit is the one
blame reports for that line. Add-only fixes have no such lines; those
anchor on the nearest executable line above each insertion point, with
the scan window widening in 5-line steps when the immediate window holds
only comments and symbols. A file with no executable line above the
insertion at all anchors on the commit that added the file.

When several distinct commits share the blame, a judge picks one. The
judge is a callable so tests can stub it and production can back it
with a model call.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import gitio
from .bugs import BugRecord, BugSpec, FaultLocation, categorize_bug
from .errors import (
    JudgeError,
    NewFileNoHistory,
    NoFallbackAnchor,
)
from .sourcetext import executable_line_numbers

FALLBACK_WINDOW = 5


@dataclass(frozen=True)
class BlameEntry:
    """One localized line attributed to a commit."""

    file_path: str
    line_number: int
    commit_id: str
    author_time: int
    is_fallback: bool = False
    anchor_note: str = ""   # set when the fallback window had to be extended
    commit_line: int = 0    # the line's number in commit_id's file version
    commit_path: str = ""   # the file's path in commit_id's version

    def to_json(self) -> dict:
        obj = {
            "file_path": self.file_path,
            "line_number": self.line_number,
            "commit_id": self.commit_id,
            "author_time": self.author_time,
            "is_fallback": self.is_fallback,
        }
        if self.anchor_note:
            obj["anchor_note"] = self.anchor_note
        return obj


@dataclass(frozen=True)
class JudgeCandidate:
    """What the judge sees for one candidate commit."""

    commit_id: str
    subject: str
    contexts: tuple[str, ...]  # +/-3 line snippets around each blamed line


# a judge maps the candidate list to an index into it
CommitJudge = Callable[[list[JudgeCandidate]], int]


def most_recent_judge_factory(repo: Path | str) -> CommitJudge:
    """Deterministic stub judge: newest candidate by author time wins."""

    def judge(candidates: list[JudgeCandidate]) -> int:
        times = [gitio.author_time(repo, c.commit_id) for c in candidates]
        return max(range(len(candidates)), key=lambda i: (times[i], -i))

    return judge


def first_candidate_judge(candidates: list[JudgeCandidate]) -> int:
    """Trivial deterministic judge: first candidate in blame order."""
    return 0


@dataclass
class BlameSummary:
    """Blame outcome for one bug."""

    bug_id: str
    entries: list[BlameEntry]
    blameability: str            # Blameable | Blameless
    unique_commits: frozenset[str]
    resolved_commit: str
    resolution_method: str       # single | judge | fallback

    def to_json(self) -> dict:
        return {
            "bug_id": self.bug_id,
            "blameability": self.blameability,
            "unique_commits": sorted(self.unique_commits),
            "resolved_commit": self.resolved_commit,
            "resolution_method": self.resolution_method,
            "entries": [e.to_json() for e in self.entries],
        }


def blame_lines(repo: Path | str, ref: str,
                location: FaultLocation) -> list[BlameEntry]:
    """Blame the modified/deleted lines of one location.

    Insertion points yield no entry here; they are handled by the
    fallback path.
    """
    targets = [ln.line for ln in location.blameable_lines]
    if not targets:
        return []
    raw = gitio.blame_file_lines(repo, ref, location.file_path, targets)
    by_line = {bl.final_line: bl for bl in raw}
    entries = []
    for num in targets:
        bl = by_line[num]
        entries.append(BlameEntry(
            file_path=location.file_path,
            line_number=num,
            commit_id=bl.commit_id,
            author_time=bl.author_time,
            is_fallback=False,
            commit_line=bl.orig_line,
            commit_path=bl.orig_filename or location.file_path,
        ))
    return entries


def fallback_blame(repo: Path | str, ref: str, path: str, insert_line: int,
                   window: int = FALLBACK_WINDOW) -> BlameEntry:
    """Anchor an insertion point on the nearest executable line above it.

    Scans insert_line-1 down to insert_line-window (floor 1) and blames
    the first executable line found. Raises NoFallbackAnchor when the
    window holds none, NewFileNoHistory when the file is absent from
    the snapshot.
    """
    if not gitio.path_exists_at(repo, ref, path):
        raise NewFileNoHistory(f"{path} does not exist in {ref}")
    text = gitio.file_at(repo, ref, path)
    numbers = executable_line_numbers(text)
    lo = max(1, insert_line - window)
    anchor = None
    for cand in range(insert_line - 1, lo - 1, -1):
        if cand in numbers:
            anchor = cand
            break
    if anchor is None:
        raise NoFallbackAnchor(
            f"{path}: no executable line in [{lo}, {insert_line - 1}]"
        )
    raw = gitio.blame_file_lines(repo, ref, path, [anchor])
    bl = raw[0]
    note = "" if insert_line - anchor <= FALLBACK_WINDOW else (
        f"window extended to {insert_line - anchor} lines"
    )
    return BlameEntry(
        file_path=path,
        line_number=anchor,
        commit_id=bl.commit_id,
        author_time=bl.author_time,
        is_fallback=True,
        anchor_note=note,
        commit_line=bl.orig_line,
        commit_path=bl.orig_filename or path,
    )


def resolve_insertion(repo: Path | str, ref: str, path: str,
                      insert_line: int) -> BlameEntry:
    """fallback_blame with the window-extension policy applied.

    The window grows in 5-line steps until an executable line appears.
    If nothing above the insertion is executable, the anchor is the
    commit that added the file.
    """
    window = FALLBACK_WINDOW
    while True:
        try:
            return fallback_blame(repo, ref, path, insert_line, window=window)
        except NoFallbackAnchor:
            if insert_line - window <= 1:
                break
            window += FALLBACK_WINDOW
    add_commit = gitio.file_add_commit(repo, ref, path)
    return BlameEntry(
        file_path=path,
        line_number=1,
        commit_id=add_commit,
        author_time=gitio.author_time(repo, add_commit),
        is_fallback=True,
        anchor_note="no executable line above insertion; using file add commit",
    )


def _judge_candidates(repo: Path | str, ref: str,
                      entries: list[BlameEntry],
                      ordered_commits: list[str]) -> list[JudgeCandidate]:
    candidates = []
    for sha in ordered_commits:
        contexts = []
        for e in entries:
            if e.commit_id != sha:
                continue
            lines = gitio.file_at(repo, ref, e.file_path).splitlines()
            lo = max(1, e.line_number - 3)
            hi = min(len(lines), e.line_number + 3)
            snippet = "\n".join(
                f"{n:>5} {lines[n - 1]}" for n in range(lo, hi + 1)
            )
            contexts.append(f"{e.file_path}:{e.line_number}\n{snippet}")
        candidates.append(JudgeCandidate(
            commit_id=sha,
            subject=gitio.commit_subject(repo, sha),
            contexts=tuple(contexts),
        ))
    return candidates


def summarize_blame(repo: Path | str, spec: BugSpec,
                    judge: CommitJudge | None = None) -> BlameSummary:
    """Resolve one bug to a single explaining commit.

    Resolution is single when exactly one commit is blamed, judge when
    several are, and fallback when the fix only inserts code.
    """
    ref = spec.snapshot_ref
    entries: list[BlameEntry] = []
    for loc in spec.locations:
        entries.extend(blame_lines(repo, ref, loc))

    # first-appearance order keeps judging deterministic
    ordered: list[str] = []
    for e in entries:
        if e.commit_id not in ordered:
            ordered.append(e.commit_id)
    unique = frozenset(ordered)
    blameability = "Blameless" if spec.all_insertion else "Blameable"

    if len(unique) == 1:
        resolved, method = ordered[0], "single"
    elif len(unique) >= 2:
        candidates = _judge_candidates(repo, ref, entries, ordered)
        if judge is None:
            judge = most_recent_judge_factory(repo)
        try:
            idx = judge(candidates)
        except Exception as exc:
            raise JudgeError(str(exc), candidates=[c.commit_id for c in candidates]) from exc
        if not isinstance(idx, int) or not 0 <= idx < len(candidates):
            raise JudgeError(
                f"judge answered {idx!r}, expected an index in [0, {len(candidates) - 1}]",
                candidates=[c.commit_id for c in candidates],
            )
        resolved, method = candidates[idx].commit_id, "judge"
    else:
        for loc in spec.locations:
            for ln in loc.insertion_lines:
                entries.append(resolve_insertion(repo, ref, loc.file_path, ln.line))
        if not any(e.is_fallback for e in entries):
            raise NoFallbackAnchor(f"{spec.bug_id}: no fallback anchor found")
        counts = Counter(e.commit_id for e in entries if e.is_fallback)
        top = max(counts.values())
        tied = [sha for sha, n in counts.items() if n == top]
        times = {
            sha: max(e.author_time for e in entries
                     if e.is_fallback and e.commit_id == sha)
            for sha in tied
        }
        resolved = max(tied, key=lambda sha: (times[sha], sha))
        method = "fallback"

    return BlameSummary(
        bug_id=spec.bug_id,
        entries=entries,
        blameability=blameability,
        unique_commits=unique,
        resolved_commit=resolved,
        resolution_method=method,
    )


@dataclass
class StudyRow:
    """Per-bug line of the availability study records file."""

    bug_id: str
    category: str
    blameability: str
    resolution_method: str
    resolved_commit: str
    unique_commit_count: int


@dataclass
class AvailabilityReport:
    """Outcome of the availability study over a dataset."""

    rows: list[StudyRow] = field(default_factory=list)
    exclusions: list[tuple[str, str]] = field(default_factory=list)  # (bug_id, reason)

    def counts(self) -> dict[str, dict[str, int]]:
        table: dict[str, dict[str, int]] = {
            cat: {"Blameable": 0, "Blameless": 0}
            for cat in ("SL", "SH", "SFMH", "MFMH")
        }
        for row in self.rows:
            table[row.category][row.blameability] += 1
        return table

    def histogram(self) -> dict[int, int]:
        """Bugs per number of unique blame commits (0 = blameless)."""
        hist: Counter = Counter(r.unique_commit_count for r in self.rows)
        return dict(sorted(hist.items()))

    @property
    def dataset_size(self) -> int:
        return len(self.rows) + len(self.exclusions)


def run_availability_study(records: list[BugRecord],
                           patches: dict[str, "object"],
                           judge: CommitJudge | None = None) -> AvailabilityReport:
    """Summarize and categorize every bug; failures become exclusions.

    `patches` maps bug_id to its FixPatch (needed for categorization).
    """
    report = AvailabilityReport()
    for rec in records:
        bug_id = rec.spec.bug_id
        try:
            category = categorize_bug(patches[bug_id])
            summary = summarize_blame(rec.repo_path, rec.spec, judge=judge)
        except KeyError:
            report.exclusions.append((bug_id, "no fix patch in manifest"))
            continue
        except Exception as exc:
            report.exclusions.append((bug_id, f"{type(exc).__name__}: {exc}"))
            continue
        report.rows.append(StudyRow(
            bug_id=bug_id,
            category=category,
            blameability=summary.blameability,
            resolution_method=summary.resolution_method,
            resolved_commit=summary.resolved_commit,
            unique_commit_count=len(summary.unique_commits),
        ))
    return report


def _pct(num: int, den: int) -> str:
    if den == 0:
        return "-"
    return f"{num / den * 100:.1f}"


def render_availability_table(report: AvailabilityReport) -> str:
    """Plain-text availability table: per-category and total counts."""
    counts = report.counts()
    lines = []
    header = f"{'Category':<10}{'Blameable':>12}{'Blameless':>12}{'Total':>8}{'%Blameable':>12}"
    lines.append(header)
    lines.append("-" * len(header))
    total_able = total_less = 0
    for cat in ("SL", "SH", "SFMH", "MFMH"):
        able = counts[cat]["Blameable"]
        less = counts[cat]["Blameless"]
        total_able += able
        total_less += less
        lines.append(
            f"{cat:<10}{able:>12}{less:>12}{able + less:>8}"
            f"{_pct(able, able + less):>12}"
        )
    grand = total_able + total_less
    lines.append(
        f"{'Total':<10}{total_able:>12}{total_less:>12}{grand:>8}"
        f"{_pct(total_able, grand):>12}"
    )
    lines.append("")
    lines.append("Unique blame commits per bug:")
    for k, n in report.histogram().items():
        lines.append(f"  {k}: {n}")
    if report.exclusions:
        lines.append("")
        lines.append(f"Excluded ({len(report.exclusions)}):")
        for bug_id, reason in report.exclusions:
            lines.append(f"  {bug_id}: {reason}")
    return "\n".join(lines) + "\n"


def write_study_outputs(report: AvailabilityReport, out_dir: Path) -> None:
    """Persist the study: plain-text table plus JSONL records."""
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "availability.txt").write_text(render_availability_table(report))
    with (out_dir / "availability_records.jsonl").open("w") as fh:
        for row in report.rows:
            fh.write(json.dumps({
                "bug_id": row.bug_id,
                "category": row.category,
                "blameability": row.blameability,
                "resolution_method": row.resolution_method,
                "resolved_commit": row.resolved_commit,
                "unique_commit_count": row.unique_commit_count,
            }) + "\n")
        for bug_id, reason in report.exclusions:
            fh.write(json.dumps({"bug_id": bug_id, "excluded": reason}) + "\n")
