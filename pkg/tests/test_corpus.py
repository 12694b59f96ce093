import csv
import json
import os
import shutil
from collections import Counter
from pathlib import Path

import pytest

from conftest import GOLDEN, read_fixture_csv
from profrisk.cli import main
from profrisk.complexity import Rank, rank_of
from profrisk.corpus import (
    CASE_COLUMNS,
    ConfigError,
    MissingRoot,
    RunConfig,
    glob_match,
    read_blocks,
    read_occurrences,
    run_analysis,
    walk_corpus,
)
from profrisk.proficiency import CompetencyLevel, RegistryError, default_registry

OUTPUTS = ("occurrences.csv", "blocks.csv", "cases.csv", "summary.json")


def config(tmp_path, root=GOLDEN, **kw):
    return RunConfig(roots=[("golden", Path(root))], output_dir=tmp_path / "out", **kw)


def rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


# --- walking --------------------------------------------------------------


def test_walk_orders_and_filters(tmp_path):
    for name in ("b.py", "a.py", "c.txt"):
        (tmp_path / name).write_text("x = 1\n")
    files = walk_corpus(RunConfig(roots=[("p", tmp_path)], output_dir=tmp_path / "o"))
    assert [f.path for f in files] == ["a.py", "b.py"]


def test_walk_excludes(tmp_path):
    (tmp_path / "tests").mkdir()
    (tmp_path / "pkg" / "tests").mkdir(parents=True)
    for rel in ("mod.py", "tests/test_x.py", "pkg/tests/t.py", "pkg/core.py"):
        (tmp_path / rel).write_text("")
    cfg = RunConfig(roots=[("p", tmp_path)], output_dir=tmp_path / "o", exclude_globs=("**/tests/**",))
    assert [f.path for f in walk_corpus(cfg)] == ["mod.py", "pkg/core.py"]


def test_walk_missing_root(tmp_path):
    with pytest.raises(MissingRoot, match="nowhere"):
        walk_corpus(RunConfig(roots=[("p", tmp_path / "nowhere")], output_dir=tmp_path / "o"))


@pytest.mark.skipif(not hasattr(os, "symlink"), reason="no symlinks")
def test_walk_does_not_follow_symlinks(tmp_path):
    real = tmp_path / "real"
    real.mkdir()
    (real / "a.py").write_text("")
    root = tmp_path / "root"
    root.mkdir()
    (root / "b.py").write_text("")
    os.symlink(real, root / "linked")
    os.symlink(real / "a.py", root / "c.py")
    assert [f.path for f in walk_corpus(RunConfig(roots=[("p", root)], output_dir=tmp_path / "o"))] == ["b.py"]


@pytest.mark.parametrize(
    "path,pattern,expected",
    [
        ("a.py", "**/*.py", True),
        ("x/y/a.py", "**/*.py", True),
        ("a.pyc", "**/*.py", False),
        ("tests/a.py", "**/tests/**", True),
        ("src/tests/a.py", "**/tests/**", True),
        ("src/mytests/a.py", "**/tests/**", False),
        ("x/a.py", "*.py", False),
        ("x/ab.py", "x/a?.py", True),
    ],
)
def test_glob_match(path, pattern, expected):
    assert glob_match(path, pattern) is expected


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig(roots=[], output_dir=tmp_path).validate()
    with pytest.raises(ConfigError):
        RunConfig(roots=[("a", tmp_path), ("a", tmp_path)], output_dir=tmp_path).validate()
    with pytest.raises(ConfigError):
        RunConfig(roots=[("a", tmp_path)], output_dir=tmp_path, formats=frozenset({"xml"})).validate()


# --- golden pipeline ------------------------------------------------------


def test_golden_cases(tmp_path):
    out = run_analysis(config(tmp_path))
    got = [
        (r["file"], r["class"], r["start_line"], r["end_line"], r["block_name"], r["rank"], r["level_category"], r["risk_category"])
        for r in rows(tmp_path / "out" / "cases.csv")
    ]
    want = [
        (r["file"], r["class"], r["start_line"], r["end_line"], r["block_name"], r["rank"], r["level_category"], r["risk_category"])
        for r in read_fixture_csv("golden_cases.csv")
    ]
    assert got == want
    assert len(got) == 9
    summary = out.summary
    assert summary["join"] == {
        "occurrences": 24, "cases": 9, "discarded_module_level": 12, "discarded_by_rank": 3, "discarded_by_level": 0,
    }
    assert summary["matrix"]["counts"] == {"Advance-Safe": 3, "Advance-Risky": 1, "Mastery-Safe": 4, "Mastery-Risky": 1}


def test_golden_occurrences(tmp_path):
    run_analysis(config(tmp_path))
    got = [(r["file"], r["class"], r["level"], int(r["start_line"]), int(r["end_line"])) for r in rows(tmp_path / "out" / "occurrences.csv")]
    want = [(r["file"], r["class"], r["level"], int(r["start_line"]), int(r["end_line"])) for r in read_fixture_csv("golden_occurrences.csv")]
    assert Counter(got) == Counter(want)


def test_golden_blocks_all_ranks(tmp_path):
    out = run_analysis(config(tmp_path, keep_ranks=frozenset(Rank)))
    got = [(b.file, b.kind, b.qualified_name, b.score, b.rank.value, b.start_line, b.end_line) for b in read_blocks(tmp_path / "out" / "blocks.csv")]
    want = [
        (r["file"], r["kind"], r["name"], int(r["cc"]), r["rank"], int(r["line_start"]), int(r["line_end"]))
        for r in read_fixture_csv("golden_blocks.csv")
    ]
    assert got == want
    assert out.summary["overview"] == [{"project": "golden", "files": 12, "C1": 14, "C2": 10, "A": 14, "F": 2}]


def test_blocks_csv_keeps_only_requested_ranks(tmp_path):
    run_analysis(config(tmp_path))
    assert {r["rank"] for r in rows(tmp_path / "out" / "blocks.csv")} == {"A", "F"}


def test_csv_schema_round_trips(tmp_path):
    out = run_analysis(config(tmp_path))
    d = tmp_path / "out"
    assert rows(d / "occurrences.csv") and list(rows(d / "occurrences.csv")[0]) == [
        "project", "directory", "file", "class", "start_line", "end_line", "level",
    ]
    assert list(rows(d / "blocks.csv")[0]) == ["project", "directory", "file", "kind", "name", "cc", "rank", "line_start", "line_end"]
    assert list(rows(d / "cases.csv")[0]) == list(CASE_COLUMNS)
    registry = default_registry()
    for occ in read_occurrences(d / "occurrences.csv"):
        assert occ.level is registry.level_of(occ.construct_class)
        assert 1 <= occ.start_line <= occ.end_line
    for block in read_blocks(d / "blocks.csv"):
        assert block.rank is rank_of(block.score) and block.start_line <= block.end_line
    assert read_occurrences(d / "occurrences.csv") == out.occurrences
    for r in rows(d / "cases.csv"):
        assert int(r["line_start"]) <= int(r["start_line"]) <= int(r["end_line"]) <= int(r["line_end"])
        assert r["level_category"] == CompetencyLevel(r["level"]).category
        assert r["risk_category"] == Rank(r["rank"]).risk_category
    raw = (d / "cases.csv").read_bytes()
    assert b"\r\n" not in raw


def test_empty_corpus(tmp_path):
    root = tmp_path / "empty"
    root.mkdir()
    run_analysis(config(tmp_path, root))
    d = tmp_path / "out"
    assert (d / "occurrences.csv").read_text().splitlines() == ["project,directory,file,class,start_line,end_line,level"]
    assert len((d / "blocks.csv").read_text().splitlines()) == 1
    assert len((d / "cases.csv").read_text().splitlines()) == 1
    summary = json.loads((d / "summary.json").read_text())
    assert summary["matrix"]["total"] == 0 and set(summary["matrix"]["counts"].values()) == {0}
    assert summary["matrix"]["phi"] is None


def test_unparseable_file_is_skipped(tmp_path):
    root = tmp_path / "corpus"
    shutil.copytree(GOLDEN, root)
    clean = tmp_path / "clean"
    run_analysis(RunConfig(roots=[("golden", root)], output_dir=clean))
    (root / "broken.py").write_bytes(b"def f(:\n")
    out = run_analysis(config(tmp_path, root))
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["files"] == {"attempted": 13, "parsed": 12, "skipped": 1}
    assert manifest["skipped_files"][0]["file"] == "broken.py"
    for name in ("occurrences.csv", "blocks.csv", "cases.csv"):
        assert (tmp_path / "out" / name).read_bytes() == (clean / name).read_bytes()
    assert out.summary["overview"][0]["files"] == 13


def test_invalid_registry_is_fatal(tmp_path):
    bad = tmp_path / "reg.txt"
    bad.write_text("broken line\n")
    with pytest.raises(RegistryError):
        run_analysis(config(tmp_path, registry_path=bad))


def test_custom_registry_levels(tmp_path):
    reg = tmp_path / "reg.txt"
    reg.write_text("Loop | node:For | A2\nSimple List Comprehension | listcomp:simple | C1\n")
    out = run_analysis(config(tmp_path, registry_path=reg, keep_levels=frozenset(CompetencyLevel)))
    levels = Counter(o.level for o in out.occurrences)
    assert levels[CompetencyLevel.A2] > 0 and levels[CompetencyLevel.C1] > 0
    assert out.join.discarded_by_level == levels[CompetencyLevel.A2]
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["registry_hash"] != default_registry().digest()


def test_format_selection(tmp_path):
    run_analysis(config(tmp_path, formats=frozenset({"json"})))
    assert sorted(p.name for p in (tmp_path / "out").iterdir()) == ["manifest.json", "summary.json"]


def test_manifest_contents(tmp_path):
    run_analysis(config(tmp_path))
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["grammar"] == "python-3.10"
    assert manifest["registry_hash"] == default_registry().digest()
    f = manifest["files"]
    assert f["attempted"] == f["parsed"] + f["skipped"]
    assert manifest["config"]["keep_levels"] == ["C1", "C2"]
    assert manifest["timestamp"].endswith("Z")


@pytest.mark.parametrize("jobs", [1, 3])
def test_byte_determinism(tmp_path, jobs):
    first = tmp_path / "first"
    run_analysis(RunConfig(roots=[("golden", GOLDEN)], output_dir=first, jobs=1))
    second = tmp_path / "second"
    run_analysis(RunConfig(roots=[("golden", GOLDEN)], output_dir=second, jobs=jobs))
    for name in OUTPUTS + ("report.txt",):
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_multiple_projects(tmp_path):
    cfg = RunConfig(roots=[("zeta", GOLDEN / "snippets"), ("alpha", GOLDEN / "pkg")], output_dir=tmp_path / "out")
    out = run_analysis(cfg)
    assert [r["project"] for r in out.summary["overview"]] == ["alpha", "zeta"]
    assert set(out.summary["matrix_per_project"]) == {"alpha", "zeta"}
    projects = [r["project"] for r in rows(tmp_path / "out" / "occurrences.csv")]
    assert projects == sorted(projects)


# --- CLI ------------------------------------------------------------------


def test_cli_success(tmp_path, capsys):
    code = main(["analyze", "--project", f"golden={GOLDEN}", "--out", str(tmp_path / "o"), "--format", "csv,json,table"])
    assert code == 0
    captured = capsys.readouterr()
    assert "Category matrix" in captured.out
    assert "9 joined cases" in captured.err
    for name in OUTPUTS + ("manifest.json",):
        assert (tmp_path / "o" / name).exists()


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["analyze", "--out", "x"],
        ["analyze", "--project", "nopath", "--out", "x"],
        ["analyze", "--project", "a=b", "--out", "x", "--levels", "C9"],
        ["analyze", "--project", "a=b", "--out", "x", "--ranks", "Z"],
        ["analyze", "--project", "a=b", "--out", "x", "--format", "xml"],
        ["analyze", "--project", "a=b", "--out", "x", "--jobs", "0"],
        ["analyze", "--project", "a=b", "--project", "a=c", "--out", "x"],
    ],
    ids=["no-command", "no-project", "bad-project", "bad-level", "bad-rank", "bad-format", "bad-jobs", "dup-project"],
)
def test_cli_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_cli_missing_root_exit_1(tmp_path, capsys):
    assert main(["analyze", "--project", f"p={tmp_path / 'absent'}", "--out", str(tmp_path / "o")]) == 1
    assert "absent" in capsys.readouterr().err


def test_cli_bad_registry_exit_1(tmp_path, capsys):
    reg = tmp_path / "r.txt"
    reg.write_text("x | y\n")
    assert main(["analyze", "--project", f"p={GOLDEN}", "--out", str(tmp_path / "o"), "--registry", str(reg)]) == 1


def test_cli_unwritable_output_exit_1(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["analyze", "--project", f"p={GOLDEN}", "--out", str(blocker / "sub")]) == 1


def test_cli_jobs_env_fallback(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("PROFRISK_JOBS", "2")
    assert main(["analyze", "--project", f"p={GOLDEN}", "--out", str(tmp_path / "o"), "--format", "json"]) == 0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["config"]["jobs"] == 2
    monkeypatch.setenv("PROFRISK_JOBS", "many")
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "--project", f"p={GOLDEN}", "--out", str(tmp_path / "o")])
    assert exc.value.code == 2


def test_cli_options_flow_into_config(tmp_path, capsys):
    out = tmp_path / "o"
    code = main([
        "analyze", "--project", f"p={GOLDEN}", "--out", str(out), "--levels", "c2", "--ranks", "F",
        "--exclude", "pkg/**", "--format", "csv", "--jobs", "1",
    ])
    assert code == 0
    assert {r["level"] for r in rows(out / "occurrences.csv")} == {"C2"}
    assert {r["rank"] for r in rows(out / "blocks.csv")} == {"F"}
    assert all(not r["file"].startswith("pkg/") for r in rows(out / "occurrences.csv"))
    assert [r["risk_category"] for r in rows(out / "cases.csv")] == ["Risky"]


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    proc = subprocess.run(
        [sys.executable, "-m", "profrisk", "analyze", "--project", f"g={GOLDEN}", "--out", str(tmp_path / "o"), "--format", "csv"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "12 parsed" in proc.stderr
    version = subprocess.run([sys.executable, "-m", "profrisk", "--version"], capture_output=True, text=True)
    assert version.returncode == 0 and "0.1.0" in version.stdout
