"""Sandbox provisioning, execution, wrappers, and teardown."""

import os

import pytest

from histrepair import gitio, sandbox as sb, synth
from histrepair.errors import (
    PatchUnavailable,
    ProvisionError,
    SandboxDead,
    TestOutputParseError,
)


@pytest.fixture
def toy(tmp_path):
    return synth.build_toy_campaign(tmp_path / "toy")


@pytest.fixture
def handle(toy, tmp_path):
    h = sb.provision(synth.TOY_BUG_ID, toy["repo"], toy["snapshot"],
                     "local-python")
    yield h
    if h.alive:
        sb.teardown(h, tmp_path / "artifacts")


def test_provision_checks_out_exact_snapshot(toy, handle):
    assert gitio.tree_hash(handle.worktree_path, "HEAD") == \
           gitio.tree_hash(toy["repo"], toy["snapshot"])
    calc = (handle.worktree_path / "calc.py").read_text()
    assert "return a - b  # fast path" in calc


def test_provision_unknown_adapter_and_backend(toy):
    with pytest.raises(ProvisionError):
        sb.provision("b", toy["repo"], toy["snapshot"], "no-such-adapter")
    with pytest.raises(ProvisionError):
        sb.provision("b", toy["repo"], toy["snapshot"], "local-python",
                     backend="vm")


def test_provision_bad_ref(toy):
    with pytest.raises(ProvisionError):
        sb.provision("b", toy["repo"], "f" * 40, "local-python")


def test_sandboxes_are_isolated_from_each_other(toy, tmp_path):
    a = sb.provision("bug-a", toy["repo"], toy["snapshot"], "local-python")
    b = sb.provision("bug-b", toy["repo"], toy["snapshot"], "local-python")
    try:
        sb.exec_command(a, "echo scribble >> calc.py")
        assert "scribble" in (a.worktree_path / "calc.py").read_text()
        assert "scribble" not in (b.worktree_path / "calc.py").read_text()
    finally:
        sb.teardown(a, tmp_path / "art-a")
        sb.teardown(b, tmp_path / "art-b")


def test_edits_never_touch_the_source_repo(toy, handle):
    sb.exec_command(handle, "echo tainted >> calc.py")
    assert "tainted" not in (toy["repo"] / "calc.py").read_text()


def test_exec_captures_streams_and_exit(handle):
    result = sb.exec_command(handle, "echo out; echo err 1>&2; exit 7")
    assert result.stdout == "out\n"
    assert result.stderr == "err\n"
    assert result.exit_code == 7
    assert result.timed_out is False


def test_exec_runs_in_worktree(handle):
    result = sb.exec_command(handle, "pwd")
    assert result.stdout.strip() == str(handle.worktree_path)


def test_env_is_allowlisted(handle, monkeypatch):
    monkeypatch.setenv("SECRET_TOKEN", "hunter2")
    result = sb.exec_command(handle, "printenv SECRET_TOKEN")
    assert result.exit_code != 0
    assert "hunter2" not in result.stdout
    home = sb.exec_command(handle, "printenv HOME").stdout.strip()
    assert home != os.environ.get("HOME")
    assert home.startswith(str(handle._root))
    assert sb.exec_command(
        handle, "printenv PYTHONDONTWRITEBYTECODE").stdout.strip() == "1"


def test_command_timeout_reports_exit_124(handle):
    result = sb.exec_command(handle, "sleep 5", timeout=0.3)
    assert result.timed_out is True
    assert result.exit_code == sb.TIMEOUT_EXIT_CODE


def test_test_wrapper_beats_shell_builtin(handle):
    # bare `test` must run the adapter's test command, not bash's builtin
    # (the builtin exits silently; the wrapper prints the failing block)
    result = sb.exec_command(handle, "test")
    assert "Failing tests: 1" in result.stdout
    assert "- test_add" in result.stdout


def test_wrapper_ignores_agent_flags(handle):
    with_flag = sb.exec_command(handle, "test -r")
    assert "Failing tests: 1" in with_flag.stdout


def test_compile_wrapper_runs(handle):
    result = sb.exec_command(handle, "compile")
    assert result.exit_code == 0
    # bytecode must not appear as tree changes
    assert sb.final_patch(handle) == ""


def test_run_test_fail_then_pass(handle):
    _, before = sb.run_test(handle)
    assert before.all_passed is False
    assert before.failing_tests == ("test_add",)
    sb.exec_command(
        handle,
        "sed -i 's/return a - b  # fast path/return a + b/' calc.py",
    )
    _, after = sb.run_test(handle)
    assert after.all_passed is True
    assert after.failing_tests == ()


def test_run_test_rejects_unparseable_output(handle):
    sb.exec_command(handle, "echo 'print(\"gibberish\")' > run_tests.py")
    with pytest.raises(TestOutputParseError):
        sb.run_test(handle)


def test_run_test_timeout_fails_closed(handle):
    sb.exec_command(handle, "printf 'import time\\ntime.sleep(9)\\n' > run_tests.py")
    _, outcome = sb.run_test(handle, timeout=0.3)
    assert outcome.all_passed is False
    assert outcome.failing_tests == ("(test run timed out)",)


PARSE_CASES = [
    ("Failing tests: 0\n", True, ()),
    ("noise\nFailing tests: 2\n  - alpha::t1\n  - beta::t2\ntrailing\n",
     False, ("alpha::t1", "beta::t2")),
    ("Failing tests: 1\n  - only_one\n", False, ("only_one",)),
]


def test_parse_failing_block_cases():
    for raw, passed, names in PARSE_CASES:
        outcome = sb.parse_failing_block(raw)
        assert outcome.all_passed is passed
        assert outcome.failing_tests == names


def test_parse_failing_block_synthesizes_unnamed():
    outcome = sb.parse_failing_block("Failing tests: 2\nno name lines\n")
    assert outcome.all_passed is False
    assert len(outcome.failing_tests) == 2
    assert all("unnamed" in n for n in outcome.failing_tests)


def test_parse_failing_block_requires_marker():
    with pytest.raises(TestOutputParseError):
        sb.parse_failing_block("OK  all good\n")


def test_fail_closed_outcome_shape():
    outcome = sb.fail_closed_outcome("x" * 5000)
    assert outcome.all_passed is False
    assert outcome.failing_tests == ("(unparsed test output)",)
    assert len(outcome.raw_excerpt) == 2000


def test_final_patch_tracks_edits_and_new_files(handle):
    assert sb.final_patch(handle) == ""
    sb.exec_command(handle, "sed -i 's/a - b  # fast path/a + b/' calc.py")
    sb.exec_command(handle, "echo '# helper' > util.py")
    patch = sb.final_patch(handle)
    assert "-    return a - b  # fast path" in patch
    assert "+    return a + b" in patch
    assert "util.py" in patch
    assert "+# helper" in patch


def test_final_patch_unavailable_after_worktree_loss(handle):
    import shutil
    shutil.rmtree(handle.worktree_path)
    with pytest.raises(PatchUnavailable):
        sb.final_patch(handle)


def test_render_command_log(handle):
    sb.exec_command(handle, "echo one", step_index=1)
    sb.exec_command(handle, "false", step_index=2)
    log = sb.render_command_log(handle)
    assert "=== step 1 (exit 0)" in log
    assert "$ echo one" in log
    assert "=== step 2 (exit 1)" in log


def test_teardown_persists_then_destroys(toy, tmp_path):
    handle = sb.provision(synth.TOY_BUG_ID, toy["repo"], toy["snapshot"],
                          "local-python")
    sb.exec_command(handle, "sed -i 's/a - b  # fast path/a + b/' calc.py",
                    step_index=1)
    root = handle._root
    manifest = sb.teardown(handle, tmp_path / "artifacts")
    assert not root.exists()
    assert handle.alive is False
    patch_text = (tmp_path / "artifacts" / f"{synth.TOY_BUG_ID}.patch").read_text()
    assert "+    return a + b" in patch_text
    log_text = (tmp_path / "artifacts" / f"{synth.TOY_BUG_ID}.commands.log").read_text()
    assert "sed -i" in log_text
    # second teardown is a no-op returning the same manifest
    assert sb.teardown(handle, tmp_path / "elsewhere") == manifest
    assert not (tmp_path / "elsewhere").exists()


def test_dead_sandbox_refuses_commands(toy, tmp_path):
    handle = sb.provision(synth.TOY_BUG_ID, toy["repo"], toy["snapshot"],
                          "local-python")
    sb.teardown(handle, tmp_path / "artifacts")
    with pytest.raises(SandboxDead):
        sb.exec_command(handle, "echo hello")
