"""Unified diff parsing and patch structure.

A parsed patch is the unit both bug categorization and diff-shaped
history payloads work on. Parsing accepts plain `diff -u` output as
well as git's variant (diff --git headers, /dev/null sides, binary
notices, mode lines).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import EmptyPatch

_HUNK_HEADER = re.compile(
    r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@"
)


@dataclass
class Hunk:
    """One @@ block: old/new start lines and the +/- line bodies."""

    old_start: int
    old_count: int
    new_start: int
    new_count: int
    lines: list[str] = field(default_factory=list)  # raw lines incl. +/-/space prefix

    @property
    def removed(self) -> int:
        return sum(1 for ln in self.lines if ln.startswith("-"))

    @property
    def added(self) -> int:
        return sum(1 for ln in self.lines if ln.startswith("+"))

    @property
    def changed(self) -> int:
        # a hunk that swaps k lines for k lines touches k lines, not 2k
        return max(self.removed, self.added)

    def old_line_numbers(self) -> list[int]:
        """1-based numbers (old side) of removed lines in this hunk."""
        numbers = []
        cursor = self.old_start
        for ln in self.lines:
            if ln.startswith("-"):
                numbers.append(cursor)
                cursor += 1
            elif ln.startswith("+"):
                continue
            else:
                cursor += 1
        return numbers


@dataclass
class FilePatch:
    """All hunks touching one file."""

    old_path: str            # "/dev/null" for a created file
    new_path: str            # "/dev/null" for a deleted file
    hunks: list[Hunk] = field(default_factory=list)
    binary: bool = False

    @property
    def path(self) -> str:
        return self.new_path if self.new_path != "/dev/null" else self.old_path


@dataclass
class Patch:
    """A parsed unified diff across any number of files."""

    files: list[FilePatch] = field(default_factory=list)

    @property
    def hunk_count(self) -> int:
        return sum(len(fp.hunks) for fp in self.files)

    @property
    def file_count(self) -> int:
        return len(self.files)

    @property
    def changed_lines(self) -> int:
        return sum(h.changed for fp in self.files for h in fp.hunks)


def _strip_prefix(path: str) -> str:
    if path == "/dev/null":
        return path
    if path.startswith(("a/", "b/")):
        return path[2:]
    return path


def parse_unified_diff(text: str) -> Patch:
    """Parse unified diff text. Raises EmptyPatch if no file changes."""
    files: list[FilePatch] = []
    current: FilePatch | None = None
    pending_old: str | None = None

    for raw in text.splitlines():
        if raw.startswith("diff --git"):
            current = None
            pending_old = None
            continue
        if raw.startswith("Binary files ") or raw.startswith("GIT binary patch"):
            m = re.match(r"Binary files (.*) and (.*) differ", raw)
            if m:
                files.append(FilePatch(
                    old_path=_strip_prefix(m.group(1)),
                    new_path=_strip_prefix(m.group(2)),
                    binary=True,
                ))
            current = None
            continue
        if raw.startswith("--- "):
            pending_old = _strip_prefix(raw[4:].split("\t")[0])
            continue
        if raw.startswith("+++ "):
            new_path = _strip_prefix(raw[4:].split("\t")[0])
            current = FilePatch(old_path=pending_old or new_path, new_path=new_path)
            files.append(current)
            pending_old = None
            continue
        m = _HUNK_HEADER.match(raw)
        if m:
            if current is None:
                raise EmptyPatch("hunk header before any file header")
            current.hunks.append(Hunk(
                old_start=int(m.group(1)),
                old_count=int(m.group(2) or "1"),
                new_start=int(m.group(3)),
                new_count=int(m.group(4) or "1"),
            ))
            continue
        if current is not None and current.hunks and raw[:1] in ("+", "-", " ", "\\"):
            if not raw.startswith("\\"):  # "\ No newline at end of file"
                current.hunks[-1].lines.append(raw)

    patch = Patch(files=files)
    if patch.file_count == 0:
        raise EmptyPatch("diff contains no file changes")
    return patch


def render_unified_diff(patch: Patch) -> str:
    """Render a Patch back to unified diff text (git-style paths)."""
    out: list[str] = []
    for fp in patch.files:
        if fp.binary:
            out.append(f"Binary files {fp.old_path} and {fp.new_path} differ")
            continue
        old = fp.old_path if fp.old_path == "/dev/null" else f"a/{fp.old_path}"
        new = fp.new_path if fp.new_path == "/dev/null" else f"b/{fp.new_path}"
        out.append(f"--- {old}")
        out.append(f"+++ {new}")
        for h in fp.hunks:
            old_c = "" if h.old_count == 1 else f",{h.old_count}"
            new_c = "" if h.new_count == 1 else f",{h.new_count}"
            out.append(f"@@ -{h.old_start}{old_c} +{h.new_start}{new_c} @@")
            out.extend(h.lines)
    return "\n".join(out) + ("\n" if out else "")
