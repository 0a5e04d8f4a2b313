"""Heuristic payload extraction, truncation, and prompt rendering."""

import subprocess

import pytest

from histrepair import blame, context, gitio
from histrepair.blame import BlameEntry
from histrepair.bugs import BugSpec, FaultLocation, LocalizedLine
from histrepair.context import (
    DEFAULT_BUDGETS,
    TRUNCATION_NOTICE,
    FlDiff,
    FnAll,
    FnAllEntry,
    FnPair,
    FunctionSnapshot,
    HistoricalContext,
    TemplateSet,
    build_context,
    context_to_json,
    extract_fl_diff,
    extract_fn_all,
    extract_fn_pair,
    payload_text,
    render_prompts,
    truncate,
)
from histrepair.errors import FnPairUnavailable, TemplateError


def entry_for(repo, ref, path, line):
    loc = FaultLocation(path, (LocalizedLine(line=line, kind="modified"),))
    return blame.blame_lines(repo, ref, loc)[0]


def simple_spec(ref):
    return BugSpec(
        bug_id="bug-1",
        snapshot_ref=ref,
        locations=(FaultLocation(
            "x.c", (LocalizedLine(line=2, kind="modified"),),
        ),),
        failing_tests=("TestX::test_two",),
        bug_report="x.c returns the wrong total.",
    )


# --- fn_all -------------------------------------------------------------

def test_fn_all_lists_cochanged_file_functions(make_repo):
    repo, shas = make_repo([
        {
            "x.c": "int f() {\n    return 1;\n}\n",
            "z.c": "int z() {\n    return 0;\n}\n",
        },
        {
            "x.c": "int f() {\n    return 2;\n}\n\nint g() {\n    return 3;\n}\n",
            "w.c": "int w() {\n    return 9;\n}\n",
        },
    ])
    payload = extract_fn_all(repo, shas[1])
    by_path = {e.file_path: e for e in payload.entries}
    assert set(by_path) == {"x.c", "w.c", "z.c"}
    assert by_path["x.c"].names == ("f", "g")
    assert by_path["w.c"].names == ("w",)
    assert by_path["z.c"].note == "deleted"
    assert by_path["z.c"].names == ()


def test_fn_all_marks_unparseable_files(make_repo):
    repo, shas = make_repo([
        {"ok.c": "int f() {\n    return 1;\n}\n"},
        {"ok.c": "int f() {\n    return 2;\n}\n",
         "broken.c": "void broken() {\n    int x = 1;\n"},
    ])
    payload = extract_fn_all(repo, shas[1])
    by_path = {e.file_path: e for e in payload.entries}
    assert by_path["broken.c"].note.startswith("unreadable:")
    assert by_path["ok.c"].names == ("f",)


# --- fn_pair ------------------------------------------------------------

BEFORE_F = "int f(int a) {\n    return a + 1;\n}"


def test_fn_pair_modified_line(make_repo):
    repo, shas = make_repo([
        {"x.c": BEFORE_F + "\n"},
        {"x.c": "int f(int a) {\n    return a + 2;\n}\n"},
    ])
    entry = entry_for(repo, shas[1], "x.c", 2)
    assert entry.commit_id == shas[1]
    pair = extract_fn_pair(repo, shas[1], entry)
    assert pair.before.body_text == BEFORE_F
    assert pair.after.body_text == "int f(int a) {\n    return a + 2;\n}"
    assert pair.before.name == pair.after.name == "f"
    assert (pair.before.start_line, pair.before.end_line) == (1, 3)


def test_fn_pair_new_function_has_no_before(make_repo):
    repo, shas = make_repo([
        {"x.c": BEFORE_F + "\n"},
        {"x.c": BEFORE_F + "\n\nint g(int a) {\n    return a * 2;\n}\n"},
    ])
    entry = entry_for(repo, shas[1], "x.c", 6)  # inside g
    pair = extract_fn_pair(repo, shas[1], entry)
    assert pair.before is None
    assert pair.after.name == "g"
    assert pair.after.body_text == "int g(int a) {\n    return a * 2;\n}"


def test_fn_pair_inserted_line_recovers_before_by_name(make_repo):
    repo, shas = make_repo([
        {"x.c": BEFORE_F + "\n"},
        {"x.c": "int f(int a) {\n    log_call();\n    return a + 1;\n}\n"},
    ])
    entry = entry_for(repo, shas[1], "x.c", 2)  # the inserted call
    pair = extract_fn_pair(repo, shas[1], entry)
    assert pair.after.body_text == "int f(int a) {\n    log_call();\n    return a + 1;\n}"
    assert pair.before is not None
    assert pair.before.body_text == BEFORE_F


def test_fn_pair_outside_functions_unavailable(make_repo):
    repo, shas = make_repo([
        {"x.c": "int LIMIT = 10;\n"},
        {"x.c": "int LIMIT = 20;\n"},
    ])
    entry = entry_for(repo, shas[1], "x.c", 1)
    with pytest.raises(FnPairUnavailable):
        extract_fn_pair(repo, shas[1], entry)


def test_fn_pair_requires_at_least_one_side():
    with pytest.raises(FnPairUnavailable):
        FnPair(before=None, after=None)


def test_fn_pair_uses_commit_side_line_numbers(make_repo):
    # snapshot has an extra leading line, so the snapshot line and the
    # blamed commit's own line differ; extraction must use the latter
    repo, shas = make_repo([
        {"x.c": BEFORE_F + "\n"},
        {"x.c": "// banner\n" + BEFORE_F + "\n"},
    ])
    entry = entry_for(repo, shas[1], "x.c", 3)  # return line, still from c0
    assert entry.commit_id == shas[0]
    assert entry.commit_line == 2
    pair = extract_fn_pair(repo, shas[0], entry)
    assert pair.after.body_text == BEFORE_F
    assert pair.before is None  # root commit has no parent


# --- fl_diff ------------------------------------------------------------

def test_fl_diff_matches_reference_git_diff(make_repo):
    repo, shas = make_repo([
        {"a.c": "one\ntwo\nthree\n"},
        {"a.c": "one\nTWO\nthree\n"},
    ])
    reference = subprocess.run(
        ["git", "-C", str(repo), "diff", "-U3", shas[0], shas[1]],
        capture_output=True, text=True, check=True,
    ).stdout
    assert extract_fl_diff(repo, shas[1]).diff_text == reference


def test_fl_diff_root_commit_diffs_against_empty_tree(make_repo):
    repo, shas = make_repo([{"a.c": "alpha\n"}])
    reference = subprocess.run(
        ["git", "-C", str(repo), "diff", "-U3", gitio.EMPTY_TREE, shas[0]],
        capture_output=True, text=True, check=True,
    ).stdout
    assert extract_fl_diff(repo, shas[0]).diff_text == reference
    assert "+alpha" in reference


# --- build_context dispatch ----------------------------------------------

def test_build_context_rejects_non_history(make_repo):
    repo, shas = make_repo([{"a.c": "x\n"}])
    with pytest.raises(ValueError):
        build_context(repo, "non_history", shas[0])
    with pytest.raises(ValueError):
        build_context(repo, "mystery", shas[0])


def test_build_context_fn_pair_needs_entry(make_repo):
    repo, shas = make_repo([{"a.c": "x\n"}])
    with pytest.raises(FnPairUnavailable):
        build_context(repo, "fn_pair", shas[0], entry=None)


def test_build_context_carries_commit_message(make_repo):
    repo, shas = make_repo([{"a.c": "alpha\n"}, {"a.c": "beta\n"}])
    ctx = build_context(repo, "fl_diff", shas[1])
    assert ctx.commit_message == "snapshot 1"
    assert ctx.kind == "fl_diff"
    assert not ctx.truncated


def test_build_context_applies_budget(make_repo):
    repo, shas = make_repo([
        {"a.c": "line\n" * 5},
        {"a.c": "line\n" * 4 + "changed\n"},
    ])
    ctx = build_context(repo, "fl_diff", shas[1], budgets={"fl_diff": 60})
    assert ctx.truncated
    assert len(ctx.payload.diff_text) <= 60


# --- truncation ----------------------------------------------------------

HEADER = "diff --git a/f.c b/f.c\n--- a/f.c\n+++ b/f.c\n"
HUNK1 = "@@ -1,3 +1,3 @@\n ctx one\n-old a\n+new a\n"
HUNK2 = "@@ -10,3 +10,3 @@\n ctx two\n-old b\n+new b\n"


def fl_ctx(text, truncated=False):
    return HistoricalContext(
        kind="fl_diff", commit_id="c" * 40, commit_message="msg",
        payload=FlDiff(diff_text=text), truncated=truncated,
    )


def test_truncate_under_budget_is_noop():
    ctx = fl_ctx(HEADER + HUNK1)
    out = truncate(ctx, len(HEADER + HUNK1) + 10)
    assert out is ctx
    assert not out.truncated


def test_truncate_keeps_whole_hunks_in_order():
    text = HEADER + HUNK1 + HUNK2
    budget = len(HEADER) + len(HUNK1) + len(HUNK2) - 1
    out = truncate(fl_ctx(text), budget)
    assert out.truncated
    assert out.payload.diff_text == (HEADER + HUNK1).rstrip("\n")


def test_truncate_budget_below_first_hunk_keeps_header_only():
    text = HEADER + HUNK1 + HUNK2
    budget = len(HEADER) + len(HUNK1) - 1
    out = truncate(fl_ctx(text), budget)
    assert out.payload.diff_text == HEADER.rstrip("\n")
    assert payload_text(out).endswith(TRUNCATION_NOTICE)


def test_truncate_is_idempotent_at_same_budget():
    text = HEADER + HUNK1 + HUNK2
    budget = len(HEADER) + len(HUNK1) + 2
    once = truncate(fl_ctx(text), budget)
    twice = truncate(once, budget)
    assert twice.payload.diff_text == once.payload.diff_text
    assert twice.truncated  # the flag survives the no-op second cut


def test_truncate_rejects_nonpositive_budget():
    with pytest.raises(ValueError):
        truncate(fl_ctx(HEADER), 0)


def test_truncate_fn_all_cuts_at_entry_boundaries():
    payload = FnAll(entries=(
        FnAllEntry("a.c", ("alpha", "beta")),
        FnAllEntry("b.c", ("gamma",)),
        FnAllEntry("c.c", ("delta",)),
    ))
    ctx = HistoricalContext(
        kind="fn_all", commit_id="c" * 40, commit_message="m", payload=payload,
    )
    line1 = "a.c: alpha, beta"
    line2 = "b.c: gamma"
    budget = len(line1) + 1 + len(line2)
    out = truncate(ctx, budget)
    assert out.truncated
    assert [e.file_path for e in out.payload.entries] == ["a.c", "b.c"]
    body = payload_text(out)
    assert body == f"{line1}\n{line2}{TRUNCATION_NOTICE}"


def make_pair(n_lines_before=30, n_lines_after=2):
    def body(n):
        return "\n".join(f"x_{i} = {i};" for i in range(n))
    return FnPair(
        before=FunctionSnapshot("a.c", "f", 1, n_lines_before, body(n_lines_before)),
        after=FunctionSnapshot("a.c", "f", 1, n_lines_after, body(n_lines_after)),
    )


def test_truncate_fn_pair_respects_total_budget():
    ctx = HistoricalContext(
        kind="fn_pair", commit_id="c" * 40, commit_message="m",
        payload=make_pair(),
    )
    budget = 150
    out = truncate(ctx, budget)
    assert out.truncated
    rendered = payload_text(out)
    assert len(rendered) <= budget + len(TRUNCATION_NOTICE)
    # cut falls on a line boundary: the kept body ends with a whole line
    assert out.payload.before.body_text.endswith(";")


def test_truncate_length_invariant_across_kinds(make_repo):
    repo, shas = make_repo([
        {"a.c": "int f() {\n" + "".join(f"    int v{i} = {i};\n" for i in range(60)) + "}\n"},
        {"a.c": "int f() {\n" + "".join(f"    int v{i} = {i + 1};\n" for i in range(60)) + "}\n"},
    ])
    for kind, budget in (("fl_diff", 300), ("fn_all", 10), ("fn_pair", 200)):
        entry = entry_for(repo, shas[1], "a.c", 5)
        ctx = build_context(repo, kind, shas[1], entry=entry,
                            budgets={kind: budget})
        assert len(payload_text(ctx)) <= budget + len(TRUNCATION_NOTICE)


# --- prompt rendering ------------------------------------------------------

def test_render_prompts_without_history(make_repo):
    repo, shas = make_repo([{"x.c": "int a;\nint b;\n"}])
    bundle = render_prompts(
        simple_spec(shas[0]), None,
        repo_path=".", sentinel="DONE_NOW",
    )
    assert bundle.config == "non_history"
    assert "# Historical Context" not in bundle.user_prompt
    assert "# Historical Context Available" not in bundle.system_prompt
    assert "echo DONE_NOW" in bundle.system_prompt
    assert "checked out at `.`" in bundle.system_prompt
    assert "TestX::test_two" in bundle.user_prompt
    assert "x.c: line 2 (modified)" in bundle.user_prompt
    assert bundle.token_estimate == (len(bundle.system_prompt) + len(bundle.user_prompt)) // 4


def test_render_prompts_with_history_embeds_payload(make_repo):
    repo, shas = make_repo([
        {"x.c": "int f() {\n    return 1;\n}\n"},
        {"x.c": "int f() {\n    return 2;\n}\n"},
    ])
    ctx = build_context(repo, "fl_diff", shas[1])
    bundle = render_prompts(
        simple_spec(shas[1]), ctx,
        repo_path=".", sentinel="DONE_NOW",
    )
    assert bundle.config == "fl_diff"
    assert "# Historical Context Available" in bundle.system_prompt
    assert "# Historical Context" in bundle.user_prompt
    assert shas[1] in bundle.user_prompt
    assert ctx.payload.diff_text in bundle.user_prompt
    assert "snapshot 1" in bundle.user_prompt


def test_render_prompts_history_note_branch(make_repo):
    repo, shas = make_repo([{"x.c": "int a;\n"}])
    bundle = render_prompts(
        simple_spec(shas[0]), None,
        repo_path=".", sentinel="S",
        history_note="historical context unavailable: no enclosing function",
    )
    assert bundle.config == "non_history"
    assert "# Historical Context" in bundle.user_prompt
    assert "historical context unavailable" in bundle.user_prompt
    # the system prompt still advertises history guidance for this branch
    assert "# Historical Context Available" in bundle.system_prompt


def test_render_is_deterministic(make_repo):
    repo, shas = make_repo([
        {"x.c": "int f() {\n    return 1;\n}\n"},
        {"x.c": "int f() {\n    return 2;\n}\n"},
    ])
    ctx = build_context(repo, "fl_diff", shas[1])
    one = render_prompts(simple_spec(shas[1]), ctx, repo_path=".", sentinel="S")
    two = render_prompts(simple_spec(shas[1]), ctx, repo_path=".", sentinel="S")
    assert one.system_prompt == two.system_prompt
    assert one.user_prompt == two.user_prompt


def test_missing_placeholder_raises_template_error(tmp_path):
    (tmp_path / "system.j2").write_text("sentinel {{ completion_sentinel }} {{ nonsense }}\n")
    (tmp_path / "user.j2").write_text("{{ bug_report }}\n")
    templates = TemplateSet.from_dir(tmp_path)
    with pytest.raises(TemplateError) as err:
        templates.render("system.j2", {"completion_sentinel": "X"})
    assert err.value.placeholder == "nonsense"


def test_context_json_round_trip_fields(make_repo):
    repo, shas = make_repo([
        {"x.c": BEFORE_F + "\n"},
        {"x.c": "int f(int a) {\n    return a + 2;\n}\n"},
    ])
    entry = entry_for(repo, shas[1], "x.c", 2)
    ctx = build_context(repo, "fn_pair", shas[1], entry=entry)
    obj = context_to_json(ctx)
    assert obj["kind"] == "fn_pair"
    assert obj["payload"]["before"]["body_text"] == BEFORE_F
    assert obj["payload"]["after"]["name"] == "f"

    ctx2 = build_context(repo, "fn_all", shas[1])
    obj2 = context_to_json(ctx2)
    assert obj2["payload"]["entries"][0]["names"] == ["f"]


def test_default_budgets_pinned():
    assert DEFAULT_BUDGETS == {"fl_diff": 12_000, "fn_pair": 8_000, "fn_all": 4_000}
