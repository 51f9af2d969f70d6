import yaml

from prethermal_probes.compare_runs import compare_csv_values, compare_runs, main
from prethermal_probes.experiments import sha256_file


def _make_run(run_dir, csv_text, seed=1):
    run_dir.mkdir()
    csv_path = run_dir / "spectrum.csv"
    csv_path.write_text(csv_text, encoding="utf-8")
    manifest = {
        "manifest": {"experiment": "spectrum", "version": "0.1.0", "seed": seed,
                     "outputs": {"spectrum.csv": sha256_file(csv_path)}},
        "config": {"experiment": "spectrum", "sampling": {"seed": seed}},
    }
    (run_dir / "manifest.yaml").write_text(yaml.safe_dump(manifest), encoding="utf-8")
    return run_dir


def test_identical_runs(tmp_path):
    text = "index,re\n0,0.0\n1,-0.5\n# tau1=2.0\n"
    run1 = _make_run(tmp_path / "a", text)
    run2 = _make_run(tmp_path / "b", text)

    is_identical, report = compare_runs(str(run1), str(run2))
    assert is_identical
    assert "IDENTICAL" in report
    assert main([str(run1), str(run2)]) == 0


def test_runs_within_tolerance_are_reported(tmp_path):
    run1 = _make_run(tmp_path / "a", "index,re\n0,1.0\n1,-0.5\n")
    run2 = _make_run(tmp_path / "b", "index,re\n0,1.0000000000001\n1,-0.5\n", seed=2)
    output_file = tmp_path / "report.txt"

    is_identical, report = compare_runs(str(run1), str(run2), rtol=1e-9, output_file=str(output_file))
    assert not is_identical
    assert "within rtol=1e-09: 1" in report
    assert "Config sections that differ: sampling" in report
    assert output_file.read_text(encoding="utf-8").startswith("\n📊 Run Information:")


def test_compare_csv_values_detects_changes(tmp_path):
    first = tmp_path / "first.csv"
    second = tmp_path / "second.csv"
    first.write_text("t,p,label\n1.0,0.5,a\n2.0,inf,b\n", encoding="utf-8")
    second.write_text("t,p,label\n1.0,0.6,a\n2.0,inf,c\n", encoding="utf-8")

    worst, problems = compare_csv_values(first, second)
    assert abs(worst - 0.1 / 0.6) < 1e-12
    assert any("'p'" in p for p in problems)
    assert any("'label'" in p for p in problems)


def test_missing_manifest(tmp_path):
    (tmp_path / "empty").mkdir()
    run = _make_run(tmp_path / "a", "index\n0\n")
    assert main([str(tmp_path / "empty"), str(run)]) == 1
