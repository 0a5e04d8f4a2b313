"""Historical context construction and prompt rendering.

Three payload shapes are built from the resolved blame commit:

* fn_all: names of every function in the post-commit version of each
  co-changed file.
* fn_pair: before/after body of the function containing the blamed
  line (before from the commit's parent, after from the commit itself).
* fl_diff: the commit's unified diff against its first parent.

Payloads are truncated to character budgets at semantic boundaries,
then injected into the user prompt. Rendering is deterministic: equal
inputs produce equal bytes.
"""

from __future__ import annotations

import difflib
import json
from dataclasses import dataclass, field
from pathlib import Path

import jinja2

from . import gitio, spans
from .blame import BlameEntry
from .bugs import BugSpec
from .errors import (
    DetectorFailure,
    FnPairUnavailable,
    NotInFunction,
    TemplateError,
)

HEURISTICS = ("non_history", "fn_all", "fn_pair", "fl_diff")

DEFAULT_BUDGETS = {"fl_diff": 12_000, "fn_pair": 8_000, "fn_all": 4_000}

TRUNCATION_NOTICE = "\n[payload truncated to fit the context budget]"


@dataclass(frozen=True)
class FunctionSnapshot:
    """One version of a function: where it lives and its full text."""

    file_path: str
    name: str
    start_line: int
    end_line: int
    body_text: str


@dataclass(frozen=True)
class FnAllEntry:
    """Function names of one co-changed file, or a note if unreadable."""

    file_path: str
    names: tuple[str, ...]
    note: str = ""  # "deleted", or a warning for unreadable content


@dataclass(frozen=True)
class FnAll:
    entries: tuple[FnAllEntry, ...]


@dataclass(frozen=True)
class FnPair:
    before: FunctionSnapshot | None
    after: FunctionSnapshot | None

    def __post_init__(self):
        if self.before is None and self.after is None:
            raise FnPairUnavailable("neither side of the function pair exists")


@dataclass(frozen=True)
class FlDiff:
    diff_text: str


@dataclass(frozen=True)
class HistoricalContext:
    """What the agent gets to see about the blamed commit."""

    kind: str  # fn_all | fn_pair | fl_diff
    commit_id: str
    commit_message: str
    payload: FnAll | FnPair | FlDiff
    truncated: bool = False


def _snapshot(file_path: str, text: str, span: spans.FunctionSpan) -> FunctionSnapshot:
    return FunctionSnapshot(
        file_path=file_path,
        name=span.name,
        start_line=span.start_line,
        end_line=span.end_line,
        body_text=span.slice_text(text),
    )


def _span_at(text: str, line: int, language: str) -> spans.FunctionSpan:
    """Enclosing span with the window degradation on detector failure."""
    try:
        return spans.enclosing_span(text, line, language)
    except DetectorFailure:
        return spans.window_span(text, line)


def extract_fn_all(repo: Path | str, commit_id: str,
                   language: str = "c_family") -> FnAll:
    """Function names per co-changed file, post-commit versions."""
    entries: list[FnAllEntry] = []
    for change in gitio.changed_files(repo, commit_id):
        if change.new_path is None:
            entries.append(FnAllEntry(change.old_path or "?", (), note="deleted"))
            continue
        try:
            text = gitio.file_at(repo, commit_id, change.new_path)
            names = tuple(spans.function_names(text, language))
        except Exception as exc:
            entries.append(FnAllEntry(
                change.new_path, (), note=f"unreadable: {type(exc).__name__}",
            ))
            continue
        entries.append(FnAllEntry(change.new_path, names))
    return FnAll(entries=tuple(entries))


def _preimage_line(old_text: str, new_text: str, new_line: int) -> int | None:
    """Map a 1-based line of new_text back to old_text, or None if added."""
    old_lines = old_text.splitlines()
    new_lines = new_text.splitlines()
    matcher = difflib.SequenceMatcher(None, old_lines, new_lines, autojunk=False)
    target = new_line - 1
    for tag, i1, i2, j1, j2 in matcher.get_opcodes():
        if not j1 <= target < j2:
            continue
        if tag == "equal":
            return i1 + (target - j1) + 1
        if tag == "replace":
            return i1 + min(target - j1, i2 - i1 - 1) + 1
        return None  # insert: the line has no pre-image
    return None


def extract_fn_pair(repo: Path | str, commit_id: str, entry: BlameEntry,
                    language: str = "c_family") -> FnPair:
    """Before/after snapshots of the function holding the blamed line.

    Before comes from the commit's parent at the line's pre-image;
    after is matched by name in the commit's own version. A function
    introduced by the commit has no before side. Raises
    FnPairUnavailable when the line sits outside any function on both
    sides.
    """
    path = entry.commit_path or entry.file_path
    line = entry.commit_line or entry.line_number
    after_text = gitio.file_at(repo, commit_id, path)
    parent = gitio.first_parent(repo, commit_id)
    parent_has_file = parent is not None and gitio.path_exists_at(repo, parent, path)

    before: FunctionSnapshot | None = None
    after: FunctionSnapshot | None = None

    if parent_has_file:
        before_text = gitio.file_at(repo, parent, path)  # type: ignore[arg-type]
        pre_line = _preimage_line(before_text, after_text, line)
        if pre_line is not None:
            try:
                before = _snapshot(path, before_text, _span_at(before_text, pre_line, language))
            except NotInFunction:
                before = None
        if before is not None:
            # match the after side by name, preferring the span that
            # still contains the blamed line (overloads)
            candidates = [s for s in spans.all_spans(after_text, language)
                          if s.name == before.name]
            containing = [s for s in candidates if s.contains(line)]
            pick = (containing or candidates or [None])[0]
            if pick is not None:
                after = _snapshot(path, after_text, pick)
            return FnPair(before=before, after=after)

    # no usable before side: anchor on the after version
    try:
        after = _snapshot(path, after_text, _span_at(after_text, line, language))
    except NotInFunction:
        raise FnPairUnavailable(
            f"{path}:{line} is outside any function in both versions"
        ) from None
    if parent_has_file:
        before_text = gitio.file_at(repo, parent, path)  # type: ignore[arg-type]
        named = [s for s in spans.all_spans(before_text, language)
                 if s.name == after.name]
        if named:
            before = _snapshot(path, before_text, named[0])
    return FnPair(before=before, after=after)


def extract_fl_diff(repo: Path | str, commit_id: str,
                    context_lines: int = 3) -> FlDiff:
    """The commit's unified diff against its first parent."""
    return FlDiff(diff_text=gitio.commit_diff(repo, commit_id, context_lines))


def build_context(repo: Path | str, kind: str, commit_id: str,
                  entry: BlameEntry | None = None,
                  language: str = "c_family",
                  budgets: dict[str, int] | None = None) -> HistoricalContext:
    """Build and truncate the payload for one heuristic kind."""
    if kind == "non_history":
        raise ValueError("non_history carries no historical context")
    message = gitio.commit_message(repo, commit_id)
    if kind == "fn_all":
        payload = extract_fn_all(repo, commit_id, language)
    elif kind == "fn_pair":
        if entry is None:
            raise FnPairUnavailable("no blame entry to anchor the function pair")
        payload = extract_fn_pair(repo, commit_id, entry, language)
    elif kind == "fl_diff":
        payload = extract_fl_diff(repo, commit_id)
    else:
        raise ValueError(f"unknown heuristic kind {kind!r}")
    ctx = HistoricalContext(
        kind=kind, commit_id=commit_id, commit_message=message,
        payload=payload,
    )
    budget = (budgets or DEFAULT_BUDGETS).get(kind, DEFAULT_BUDGETS[kind])
    return truncate(ctx, budget)


# ---------------------------------------------------------------------------
# payload rendering and truncation

def _render_fn_all(payload: FnAll) -> str:
    lines = []
    for e in payload.entries:
        if e.note:
            lines.append(f"{e.file_path}: ({e.note})")
        elif e.names:
            lines.append(f"{e.file_path}: {', '.join(e.names)}")
        else:
            lines.append(f"{e.file_path}: (no functions)")
    return "\n".join(lines)


def _render_side(label: str, side: FunctionSnapshot | None) -> str:
    if side is None:
        return f"{label}: (absent)"
    head = (f"{label}: {side.name} "
            f"({side.file_path}:{side.start_line}-{side.end_line})")
    return f"{head}\n{side.body_text}"


def _render_fn_pair(payload: FnPair) -> str:
    return "\n\n".join([
        _render_side("Before", payload.before),
        _render_side("After", payload.after),
    ])


def payload_text(ctx: HistoricalContext) -> str:
    """The payload as prompt-ready text, notice appended when truncated."""
    if isinstance(ctx.payload, FnAll):
        body = _render_fn_all(ctx.payload)
    elif isinstance(ctx.payload, FnPair):
        body = _render_fn_pair(ctx.payload)
    else:
        body = ctx.payload.diff_text
    if ctx.truncated:
        body += TRUNCATION_NOTICE
    return body


def _truncate_text_at_lines(text: str, budget: int) -> tuple[str, bool]:
    """Longest line-boundary prefix of `text` within `budget` chars."""
    if len(text) <= budget:
        return text, False
    kept: list[str] = []
    size = 0
    for line in text.splitlines(keepends=True):
        if size + len(line) > budget:
            break
        kept.append(line)
        size += len(line)
    return "".join(kept).rstrip("\n"), True


_DIFF_HEADER_PREFIXES = (
    "diff ", "index ", "--- ", "+++ ", "Binary files",
    "new file", "deleted file", "old mode", "new mode",
    "similarity", "rename ",
)


def _truncate_fl_diff(payload: FlDiff, budget: int) -> tuple[FlDiff, bool]:
    text = payload.diff_text
    if len(text) <= budget:
        return payload, False
    # split into header runs and whole hunks, then keep the longest
    # prefix that fits; a budget below the first hunk leaves headers only
    pieces: list[str] = []
    current: list[str] | None = None
    headers: list[str] = []
    for line in text.splitlines(keepends=True):
        if line.startswith("@@"):
            if headers:
                pieces.append("".join(headers))
                headers = []
            if current is not None:
                pieces.append("".join(current))
            current = [line]
        elif line.startswith(_DIFF_HEADER_PREFIXES):
            if current is not None:
                pieces.append("".join(current))
                current = None
            headers.append(line)
        elif current is not None:
            current.append(line)
        else:
            headers.append(line)
    if current is not None:
        pieces.append("".join(current))
    if headers:
        pieces.append("".join(headers))

    kept: list[str] = []
    size = 0
    for piece in pieces:
        if size + len(piece) > budget:
            break
        kept.append(piece)
        size += len(piece)
    return FlDiff(diff_text="".join(kept).rstrip("\n")), True


def _truncate_fn_all(payload: FnAll, budget: int) -> tuple[FnAll, bool]:
    if len(_render_fn_all(payload)) <= budget:
        return payload, False
    kept: list[FnAllEntry] = []
    size = 0
    for e in payload.entries:
        rendered = len(_render_fn_all(FnAll((e,)))) + (1 if kept else 0)
        if size + rendered > budget:
            break
        kept.append(e)
        size += rendered
    return FnAll(entries=tuple(kept)), True


def _truncate_fn_pair(payload: FnPair, budget: int) -> tuple[FnPair, bool]:
    if len(_render_fn_pair(payload)) <= budget:
        return payload, False

    # labels and separators count against the budget too, so each side
    # gets half of what remains after that fixed overhead
    def head_len(label: str, side: FunctionSnapshot | None) -> int:
        if side is None:
            return len(f"{label}: (absent)")
        return len(f"{label}: {side.name} "
                   f"({side.file_path}:{side.start_line}-{side.end_line})") + 1

    overhead = head_len("Before", payload.before) + 2 + head_len("After", payload.after)
    side_budget = max(1, (budget - overhead) // 2)
    cut = False

    def shrink(side: FunctionSnapshot | None) -> FunctionSnapshot | None:
        nonlocal cut
        if side is None or len(side.body_text) <= side_budget:
            return side
        text, did = _truncate_text_at_lines(side.body_text, side_budget)
        cut = cut or did
        return FunctionSnapshot(
            file_path=side.file_path, name=side.name,
            start_line=side.start_line, end_line=side.end_line,
            body_text=text,
        )

    before = shrink(payload.before)
    after = shrink(payload.after)
    if not cut:
        return payload, False
    return FnPair(before=before, after=after), True


def truncate(ctx: HistoricalContext, budget: int) -> HistoricalContext:
    """Cut the payload to `budget` characters at semantic boundaries.

    Idempotent at a fixed budget: content already within budget is
    returned as-is (the truncated flag survives earlier cuts).
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    if isinstance(ctx.payload, FlDiff):
        payload, cut = _truncate_fl_diff(ctx.payload, budget)
    elif isinstance(ctx.payload, FnAll):
        payload, cut = _truncate_fn_all(ctx.payload, budget)
    else:
        payload, cut = _truncate_fn_pair(ctx.payload, budget)
    if not cut:
        return ctx
    return HistoricalContext(
        kind=ctx.kind, commit_id=ctx.commit_id,
        commit_message=ctx.commit_message, payload=payload, truncated=True,
    )


# ---------------------------------------------------------------------------
# prompt rendering

@dataclass(frozen=True)
class PromptBundle:
    """The rendered system/user prompt pair for one run."""

    system_prompt: str
    user_prompt: str
    token_estimate: int
    config: str  # heuristic kind, non_history when no context


@dataclass
class TemplateSet:
    """Jinja templates for the system and user prompts."""

    env: jinja2.Environment
    system_name: str = "system.j2"
    user_name: str = "user.j2"

    @classmethod
    def from_dir(cls, template_dir: Path | str) -> "TemplateSet":
        env = jinja2.Environment(
            loader=jinja2.FileSystemLoader(str(template_dir)),
            undefined=jinja2.StrictUndefined,
            keep_trailing_newline=True,
            autoescape=False,
        )
        return cls(env=env)

    @classmethod
    def default(cls) -> "TemplateSet":
        return cls.from_dir(Path(__file__).parent / "templates")

    def render(self, name: str, bindings: dict) -> str:
        try:
            return self.env.get_template(name).render(**bindings)
        except jinja2.UndefinedError as exc:
            msg = str(exc)
            placeholder = msg.split("'")[1] if "'" in msg else msg
            raise TemplateError(placeholder) from exc


def render_prompts(spec: BugSpec, context: HistoricalContext | None,
                   templates: TemplateSet | None = None, *,
                   repo_path: str,
                   sentinel: str,
                   history_note: str = "") -> PromptBundle:
    """Render the prompt pair. History appears iff context is given.

    `history_note` substitutes for a payload when a heuristic could not
    be built (the run proceeds with the notice instead of nothing).
    """
    templates = templates or TemplateSet.default()
    has_history = context is not None or bool(history_note)
    system = templates.render(templates.system_name, {
        "repo_path": repo_path,
        "completion_sentinel": sentinel,
        "history_enabled": has_history,
    })
    locations = [
        {
            "file": loc.file_path,
            "lines": [{"line": ln.line, "kind": ln.kind} for ln in loc.lines],
        }
        for loc in spec.locations
    ]
    history = None
    if context is not None:
        history = {
            "kind": context.kind,
            "commit_id": context.commit_id,
            "commit_message": context.commit_message,
            "payload": payload_text(context),
        }
    user = templates.render(templates.user_name, {
        "bug_report": spec.bug_report,
        "failing_tests": list(spec.failing_tests),
        "locations": locations,
        "history": history,
        "history_note": history_note,
    })
    config = context.kind if context is not None else "non_history"
    return PromptBundle(
        system_prompt=system,
        user_prompt=user,
        token_estimate=(len(system) + len(user)) // 4,
        config=config,
    )


def context_to_json(ctx: HistoricalContext) -> dict:
    """Machine-readable sidecar form of a historical context."""
    obj: dict = {
        "kind": ctx.kind,
        "commit_id": ctx.commit_id,
        "commit_message": ctx.commit_message,
        "truncated": ctx.truncated,
    }
    if isinstance(ctx.payload, FnAll):
        obj["payload"] = {
            "entries": [
                {"file_path": e.file_path, "names": list(e.names), "note": e.note}
                for e in ctx.payload.entries
            ],
        }
    elif isinstance(ctx.payload, FnPair):
        def side(s: FunctionSnapshot | None):
            if s is None:
                return None
            return {
                "file_path": s.file_path, "name": s.name,
                "start_line": s.start_line, "end_line": s.end_line,
                "body_text": s.body_text,
            }
        obj["payload"] = {"before": side(ctx.payload.before),
                          "after": side(ctx.payload.after)}
    else:
        obj["payload"] = {"diff_text": ctx.payload.diff_text}
    return obj


def save_context(ctx: HistoricalContext, path: Path) -> None:
    path.write_text(json.dumps(context_to_json(ctx), indent=2) + "\n")
