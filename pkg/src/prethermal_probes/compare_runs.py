#!/usr/bin/env python3
"""
두 개의 실행 디렉터리(manifest.yaml + CSV/JSON 출력)를 비교하는 스크립트
"""
import argparse
import csv
import sys
from pathlib import Path

import numpy as np
import yaml


def load_manifest(run_dir):
    """실행 디렉터리의 manifest.yaml 을 로드합니다."""
    path = Path(run_dir) / "manifest.yaml"
    try:
        with open(path, "r", encoding="utf-8") as f:
            manifest = yaml.safe_load(f)
    except FileNotFoundError:
        print(f"❌ Error: {path} 파일을 찾을 수 없습니다.")
        return None
    except yaml.YAMLError as e:
        print(f"❌ Error: {path} YAML 파싱 중 오류 발생: {e}")
        return None
    if not isinstance(manifest, dict) or "manifest" not in manifest:
        print(f"❌ Error: {path} 는 실행 manifest 가 아닙니다.")
        return None
    return manifest


def _read_numeric_rows(path):
    with open(path, "r", encoding="utf-8", newline="") as f:
        lines = [line for line in f if not line.startswith("# ")]
    return list(csv.DictReader(lines))


def compare_csv_values(path1, path2, rtol=1e-9, atol=0.0):
    """
    해시가 다른 CSV 를 값 단위로 비교합니다.

    Returns:
        (max_relative_difference, problems): 숫자 열의 최대 상대 오차와 구조 차이 목록
    """
    rows1, rows2 = _read_numeric_rows(path1), _read_numeric_rows(path2)
    if len(rows1) != len(rows2):
        return float("inf"), [f"row count {len(rows1)} vs {len(rows2)}"]
    if rows1 and rows1[0].keys() != rows2[0].keys():
        return float("inf"), ["column names differ"]

    worst = 0.0
    problems = []
    for column in rows1[0].keys() if rows1 else []:
        try:
            a = np.array([float(r[column]) for r in rows1])
            b = np.array([float(r[column]) for r in rows2])
        except ValueError:
            if [r[column] for r in rows1] != [r[column] for r in rows2]:
                problems.append(f"column {column!r} differs")
            continue
        finite = np.isfinite(a) & np.isfinite(b)
        if not np.array_equal(np.isfinite(a), np.isfinite(b)) or not np.array_equal(a[~finite], b[~finite]):
            problems.append(f"column {column!r} has mismatched non-finite values")
        if finite.any():
            scale = np.maximum(np.abs(a[finite]), np.abs(b[finite]))
            diff = np.abs(a[finite] - b[finite])
            with np.errstate(divide="ignore", invalid="ignore"):
                rel = np.where(scale > 0, diff / scale, 0.0)
            worst = max(worst, float(rel.max()))
            if not np.allclose(a[finite], b[finite], rtol=rtol, atol=atol):
                problems.append(f"column {column!r} exceeds rtol={rtol:g} (max rel {rel.max():.3e})")
    return worst, problems


def compare_runs(run1, run2, rtol=1e-9, verbose=False, output_file=None):
    """
    두 실행 결과를 비교합니다.

    Args:
        run1, run2: 실행 디렉터리 (manifest.yaml 포함)
        rtol: 해시가 다른 CSV 의 값 비교 허용 오차
        verbose: 상세 출력 여부
        output_file: 비교 결과를 저장할 파일 경로 (None이면 저장 안함)

    Returns:
        (is_identical, report): byte 단위 동일 여부와 비교 리포트 텍스트
    """
    print("\n🔍 Loading manifests...")
    manifest1 = load_manifest(run1)
    manifest2 = load_manifest(run2)
    if not manifest1 or not manifest2:
        return False, ""

    report_lines = []

    def add_line(text=""):
        report_lines.append(text)
        print(text)

    add_line("\n📊 Run Information:")
    for label, run_dir, manifest in (("Run 1", run1, manifest1), ("Run 2", run2, manifest2)):
        meta = manifest["manifest"]
        add_line(f"\n  {label}: {run_dir}")
        add_line(f"    - Experiment: {meta.get('experiment')}")
        add_line(f"    - Version: {meta.get('version')}")
        add_line(f"    - Seed: {meta.get('seed')}")
        add_line(f"    - Outputs: {len(meta.get('outputs', {}))}")

    outputs1 = manifest1["manifest"].get("outputs", {})
    outputs2 = manifest2["manifest"].get("outputs", {})
    only_in_1 = sorted(set(outputs1) - set(outputs2))
    only_in_2 = sorted(set(outputs2) - set(outputs1))
    common = sorted(set(outputs1) & set(outputs2))

    add_line("\n" + "=" * 80)
    add_line("📋 OUTPUT COMPARISON")
    add_line("=" * 80)
    if only_in_1:
        add_line(f"\n⚠️  Outputs only in Run 1: {', '.join(only_in_1)}")
    if only_in_2:
        add_line(f"\n⚠️  Outputs only in Run 2: {', '.join(only_in_2)}")

    matches, differences = [], []
    for name in common:
        if outputs1[name] == outputs2[name]:
            matches.append(name)
            if verbose:
                add_line(f"    ✓ {name}: {outputs1[name][:12]}")
            continue
        entry = {"name": name, "max_rel": None, "problems": []}
        if name.endswith(".csv"):
            entry["max_rel"], entry["problems"] = compare_csv_values(Path(run1) / name, Path(run2) / name, rtol)
        differences.append(entry)

    if differences:
        add_line(f"\n⚠️  Outputs with different hashes: {len(differences)}")
        add_line("\n{:<40} {:>15} {:>12}".format("Output", "Max rel diff", "Within rtol"))
        add_line("-" * 70)
        for entry in differences:
            max_rel = "-" if entry["max_rel"] is None else f"{entry['max_rel']:.3e}"
            within = "n/a" if entry["max_rel"] is None else ("yes" if not entry["problems"] else "no")
            add_line("{:<40} {:>15} {:>12}".format(entry["name"][:39], max_rel, within))
            for problem in entry["problems"]:
                add_line(f"    - {problem}")
    else:
        add_line("\n✅ No hash differences found!")

    config1, config2 = manifest1.get("config", {}), manifest2.get("config", {})
    changed = sorted(k for k in set(config1) | set(config2) if config1.get(k) != config2.get(k))
    if changed:
        add_line(f"\n⚠️  Config sections that differ: {', '.join(changed)}")

    add_line("\n" + "=" * 80)
    add_line("📝 SUMMARY")
    add_line("=" * 80)
    is_identical = not (only_in_1 or only_in_2 or differences)
    if is_identical:
        add_line(f"\n✅ Runs are IDENTICAL! ({len(matches)} outputs)")
    else:
        add_line("\n⚠️  Runs have DIFFERENCES:")
        add_line(f"   - Matching outputs: {len(matches)}")
        add_line(f"   - Different outputs: {len(differences)}")
        within = [e for e in differences if e["max_rel"] is not None and not e["problems"]]
        if within:
            add_line(f"   - Of those, within rtol={rtol:g}: {len(within)}")

    if output_file:
        try:
            with open(output_file, "w", encoding="utf-8") as f:
                f.write("\n".join(report_lines) + "\n")
            print(f"\n📄 Comparison report saved: {output_file}")
        except OSError as e:
            print(f"\n❌ Error saving report: {e}")

    return is_identical, "\n".join(report_lines)


def main(argv=None):
    parser = argparse.ArgumentParser(description="두 개의 실행 디렉터리 출력을 비교합니다.")
    parser.add_argument("run1", help="첫 번째 실행 디렉터리")
    parser.add_argument("run2", help="두 번째 실행 디렉터리")
    parser.add_argument("--rtol", type=float, default=1e-9, help="Relative tolerance for CSV values whose hashes differ.")
    parser.add_argument("--report", default=None, help="Write the comparison report to this file.")
    parser.add_argument("--verbose", "-v", action="store_true", help="상세 출력 모드")
    args = parser.parse_args(argv)

    is_identical, _ = compare_runs(args.run1, args.run2, args.rtol, args.verbose, args.report)
    return 0 if is_identical else 1


if __name__ == "__main__":
    sys.exit(main())
