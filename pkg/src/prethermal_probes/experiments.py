"""
실험 파이프라인: dynamics / fisher-sweep / nlevel / xi-bound / spectrum.

각 파이프라인은 CSV (정식 결과) 와 manifest.yaml 을 out_dir 에 쓰고,
불변식 위반은 RunResult.violations 로 모아 돌려준다 (CLI 가 exit 4 로 변환).
"""
import csv
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import grid_values
from .dynamics import (
    ReducedState,
    analyze_timescales,
    build_redfield_generator,
    closed_form_evolution,
    evolve,
    lepe_eigenvalues,
    prethermal_state,
    unified_generator_v,
)
from .metrology import (
    FisherReport,
    equilibrium_fisher,
    improvement_factor,
    optimal_degeneracy,
    precision_bound,
    prethermal_fisher,
    prethermal_timescale,
    qfi_equilibrium_n,
    qfi_time_series,
)
from .numerics import general_eig
from .probes import initial_state, nlevel_model, qubit_model, thermal_rates, v_model
from .sampling import COLUMNS as XI_COLUMNS
from .sampling import witness_states, xi_bin_ranges, xi_bound_study

ADVANTAGE_BETA_RANGE = (2.0, 6.0)


@dataclass
class RunResult:
    experiment: str
    out_dir: Path
    outputs: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)


# --- 출력 도구 ---
def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, columns, rows, footer=None):
    """헤더 + 행 + '# key=value' footer. 타임스탬프 없음 (재현성)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _fmt(row.get(key)) for key in columns})
        for key, value in (footer or {}).items():
            f.write(f"# {key}={_fmt(value)}\n")
    return path


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(result, config):
    """설정 전체 + 버전 + 출력 해시. 그대로 --config 로 재실행 가능."""
    manifest = {
        "manifest": {
            "package": "prethermal-probes",
            "version": __version__,
            "experiment": result.experiment,
            "seed": config["sampling"]["seed"],
            "outputs": {Path(p).name: sha256_file(p) for p in result.outputs},
        },
        "config": config.as_dict(),
    }
    path = Path(result.out_dir) / "manifest.yaml"
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(manifest, f, sort_keys=False, allow_unicode=True)
    return path


def save_figure(path, curves, xlabel, ylabel, logx=False, logy=False, scatter=False):
    """
    matplotlib (선택 의존성) 이 있으면 SVG 저장, 없으면 경고만 출력.

    Args:
        curves: [(label, x, y), ...]
    """
    try:
        import matplotlib

        matplotlib.use("Agg")
        matplotlib.rcParams["svg.hashsalt"] = "prethermal-probes"
        import matplotlib.pyplot as plt
    except ImportError:
        print("⚠️  matplotlib not installed; skipping plots (pip install -e \".[plots]\")")
        return None

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, x, y in curves:
        if scatter:
            ax.scatter(x, y, s=1, label=label)
        else:
            ax.plot(x, y, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)


def _ordered_map(func, items, threads):
    """threads > 1 이면 ThreadPoolExecutor, 결과 순서는 입력 순서."""
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            return list(executor.map(func, items))
    return [func(item) for item in items]


def _model_from(probe, beta=None, degeneracy=2):
    return nlevel_model(
        degeneracy,
        nu=probe["nu"],
        delta=probe["delta"],
        gamma=probe["gamma"],
        beta=probe["beta"] if beta is None else beta,
        cluster_tol=probe["cluster_tol"],
    )


# --- dynamics ---
DYNAMICS_COLUMNS = ("t", "p", "sigmaR", "sigmaI", "ground_pop", "trace_err", "min_eig",
                    "p_closed_form", "sigmaR_closed_form")


def run_dynamics(config, out_dir):
    result = RunResult("dynamics", Path(out_dir))
    probe, tol = config["probe"], config["tolerances"]
    model = _model_from(probe)
    rates = thermal_rates(model)
    times = grid_values(config["time_grid"])
    if config["dynamics"]["generator"] == "reduced":
        gen = unified_generator_v(rates, probe["delta"])
    else:
        gen = build_redfield_generator(model, config["dynamics"]["variant"])
    lepe = lepe_eigenvalues(rates, probe["delta"])
    print(f"📊 k={rates.k:.6g}, phi={rates.phi:.6g}, tau1={lepe.tau1:.6g}, tau2={lepe.tau2:.6g}")

    curves = []
    for kind in config["initial"]["kinds"]:
        init = initial_state(kind, model, beta_ambient=probe["beta_ambient"], custom=config["initial"]["custom"])
        traj = evolve(gen, init.rho, times)
        closed = closed_form_evolution(rates, probe["delta"], ReducedState(init.p0, init.sigma0R), times)
        p, sigma = traj.excited_mean(), traj.coherence()
        dev_p = float(np.max(np.abs(p - closed.p)))
        dev_sigma = float(np.max(np.abs(sigma.real - closed.sigmaR)))

        timescales = analyze_timescales(gen, initial=init.rho)
        t_plateau = timescales.plateau_time if math.isfinite(timescales.plateau_time) else 10.0 * lepe.tau2
        plateau_numeric = evolve(gen, init.rho, [t_plateau])
        plateau = prethermal_state(model.beta, model.nu, init.xi)

        rows = [
            {
                "t": times[i], "p": p[i], "sigmaR": sigma[i].real, "sigmaI": sigma[i].imag,
                "ground_pop": traj.ground_population()[i], "trace_err": traj.trace_errors[i],
                "min_eig": traj.min_eigs[i], "p_closed_form": closed.p[i], "sigmaR_closed_form": closed.sigmaR[i],
            }
            for i in range(len(times))
        ]
        footer = {
            "initial": kind,
            "xi": init.xi,
            "propagation": traj.method,
            "max_dev_p": dev_p,
            "max_dev_sigmaR": dev_sigma,
            "plateau_time": t_plateau,
            "plateau_p": plateau_numeric.excited_mean()[0],
            "plateau_sigmaR": plateau_numeric.coherence()[0].real,
            "prethermal_p_tilde": plateau.p_tilde,
            "prethermal_sigma_tilde": plateau.sigma_tilde,
        }
        path = write_csv(result.out_dir / f"dynamics_{kind}.csv", DYNAMICS_COLUMNS, rows, footer)
        result.outputs.append(path)
        result.summary[kind] = {"max_dev_p": dev_p, "max_dev_sigmaR": dev_sigma, "xi": init.xi}

        if max(dev_p, dev_sigma) > tol["closed_form"]:
            result.violations.append(
                f"{kind}: numeric vs closed-form deviation {max(dev_p, dev_sigma):.3e} > {tol['closed_form']:.1e}"
            )
        if traj.trace_errors.max() > tol["trace"]:
            result.violations.append(f"{kind}: trace error {traj.trace_errors.max():.3e}")
        if traj.min_eigs.min() < -tol["positivity"]:
            result.violations.append(f"{kind}: negative eigenvalue {traj.min_eigs.min():.3e}")
        print(f"  ✓ {kind}: xi={init.xi:.6f}, max |Δp|={dev_p:.2e}, max |ΔσR|={dev_sigma:.2e}")
        curves += [(f"p ({kind})", times, p), (f"σR ({kind})", times, sigma.real)]

    if config["output"]["plots"]:
        save_figure(result.out_dir / "dynamics.svg", curves, "t", "value", logx=True)
    return result


# --- fisher-sweep ---
FISHER_COLUMNS = ("beta", "xi_or_N", "cfi", "qfi", "tau1", "tau2", "tcfi", "tqfi", "method",
                  "series", "tau_used", "improvement", "precision_cfi", "precision_qfi")
PRETHERMAL_METHODS = ("analytic", "numeric-sld")


def _fisher_row(report, tau1, tau2, xi_or_n):
    return {
        "beta": report.beta, "xi_or_N": xi_or_n, "cfi": report.cfi, "qfi": report.qfi,
        "tau1": tau1, "tau2": tau2, "tcfi": report.tcfi, "tqfi": report.tqfi, "method": report.method,
        "series": report.series, "tau_used": report.tau_used, "improvement": improvement_factor(tau1, tau2),
        "precision_cfi": precision_bound(report.tcfi), "precision_qfi": precision_bound(report.tqfi),
    }


def fisher_point(config, beta):
    """한 β 에서 prethermal (해석식 + 수치 SLD) / 평형 / N* 리포트 묶음."""
    probe = config["probe"]
    model = _model_from(probe, beta=beta)
    rates = thermal_rates(model)
    if config["fisher"]["timescales"] == "lepe":
        lepe = lepe_eigenvalues(rates, probe["delta"])
        tau1, tau2 = lepe.tau1, lepe.tau2
    else:
        report = analyze_timescales(unified_generator_v(rates, probe["delta"]))
        tau1, tau2 = report.tau1, report.tau2

    rows = []
    for kind in config["initial"]["kinds"]:
        init = initial_state(kind, model, beta_ambient=probe["beta_ambient"], custom=config["initial"]["custom"])
        for method in PRETHERMAL_METHODS:
            fisher = prethermal_fisher(beta, model.nu, init.xi, tau2, method=method, series=f"prethermal-{kind}")
            rows.append(_fisher_row(fisher, tau1, tau2, init.xi))
    rows.append(_fisher_row(equilibrium_fisher(beta, model.nu, tau1, 2, series="equilibrium-v"), tau1, tau2, 2))
    optimum = optimal_degeneracy(beta, model.nu)
    nstar = FisherReport(beta=beta, cfi=optimum.qfi_continuous, qfi=optimum.qfi_continuous,
                         tau_used=tau1, method="analytic", series="equilibrium-nstar")
    rows.append(_fisher_row(nstar, tau1, tau2, optimum.n_integer))
    return rows


def _method_disagreement(rows):
    """같은 (β, series) 의 해석식 / 수치 SLD 값 사이 최대 상대 차이."""
    pairs = {}
    for row in rows:
        if row["series"].startswith("prethermal-"):
            pairs.setdefault((row["beta"], row["series"]), {})[row["method"]] = row
    worst = 0.0
    for pair in pairs.values():
        analytic, numeric = pair["analytic"], pair["numeric-sld"]
        for key in ("cfi", "qfi"):
            # ξ = −1 에서는 둘 다 0 이므로 절대 오차 1e-12 를 허용
            gap = abs(numeric[key] - analytic[key])
            if gap > 1e-12:
                worst = max(worst, gap / abs(analytic[key]) if analytic[key] else math.inf)
    return worst


def _advantage_violations(rows, threshold, method):
    lo, hi = ADVANTAGE_BETA_RANGE
    problems = []
    by_beta = {}
    for row in rows:
        if row["series"].startswith("prethermal-") and row["method"] != method:
            continue
        by_beta.setdefault(row["beta"], {})[row["series"]] = row
    for beta, series in by_beta.items():
        if not lo <= beta <= hi:
            continue
        eq_v, nstar = series["equilibrium-v"]["tqfi"], series["equilibrium-nstar"]["tqfi"]
        for name, row in series.items():
            if not name.startswith("prethermal-") or row["qfi"] == 0:
                continue
            checks = [("TQFI/TQFI_eq", row["tqfi"] / eq_v), ("TCFI/TQFI_eq", row["tcfi"] / eq_v),
                      ("TQFI/TQFI_N*", row["tqfi"] / nstar)]
            if name == "prethermal-ground":
                checks.append(("TCFI/TQFI_N*", row["tcfi"] / nstar))
            for label, ratio in checks:
                if not ratio > threshold:
                    problems.append(f"beta={beta:.4g} {name}: {label} = {ratio:.3g} <= {threshold:g}")
    return problems


def run_fisher_sweep(config, out_dir):
    result = RunResult("fisher-sweep", Path(out_dir))
    betas = grid_values(config["beta_grid"])
    method, tol = config["fisher"]["method"], config["tolerances"]
    print(f"📊 Fisher sweep over {len(betas)} beta values ({config['fisher']['timescales']} timescales)")
    chunks = _ordered_map(lambda beta: fisher_point(config, float(beta)), betas, config["threads"])
    rows = [row for chunk in chunks for row in chunk]

    result.violations.extend(_advantage_violations(rows, tol["advantage"], method))
    disagreement = _method_disagreement(rows)
    if disagreement > tol["fisher_agreement"]:
        result.violations.append(
            f"analytic and numeric-sld prethermal Fisher information differ by {disagreement:.3e} "
            f"> {tol['fisher_agreement']:.1e}"
        )
    equilibrium = {row["beta"]: row["tqfi"] for row in rows if row["series"] == "equilibrium-v"}
    advantage = [
        row["tqfi"] / equilibrium[row["beta"]]
        for row in rows
        if row["series"].startswith("prethermal-") and row["method"] == method and row["qfi"] > 0
    ]
    footer = {
        "timescales": config["fisher"]["timescales"],
        "method": method,
        "min_tqfi_advantage": min(advantage) if advantage else None,
        "max_method_rel_diff": disagreement,
    }
    result.outputs.append(write_csv(result.out_dir / "fisher_sweep.csv", FISHER_COLUMNS, rows, footer))
    result.summary = {"points": len(rows), "min_tqfi_advantage": footer["min_tqfi_advantage"],
                      "max_method_rel_diff": disagreement}
    print(f"  ✓ {len(rows)} rows, min TQFI advantage {footer['min_tqfi_advantage']}, "
          f"analytic vs numeric-sld {disagreement:.2e}")

    if config["output"]["plots"]:
        curves = []
        for series in dict.fromkeys(row["series"] for row in rows):
            picked = [row for row in rows
                      if row["series"] == series and (not series.startswith("prethermal-") or row["method"] == method)]
            key = "tcfi" if series.startswith("prethermal-") else "tqfi"
            curves.append((f"{key.upper()} {series}", [r["beta"] for r in picked], [r[key] for r in picked]))
        save_figure(result.out_dir / "fisher_sweep.svg", curves, "beta", "time-weighted Fisher", logy=True)
    return result


# --- nlevel ---
NLEVEL_QFI_COLUMNS = ("t", "qfi", "cfi", "qfi_equilibrium")
NLEVEL_TQFI_COLUMNS = ("beta", "degeneracy", "cfi_prethermal", "qfi_prethermal", "qfi_equilibrium",
                       "tau1_fixed", "tau2_fixed", "tau1_exact", "tau2_exact", "tcfi_prethermal_fixed",
                       "tcfi_prethermal_exact", "tqfi_equilibrium_fixed", "tqfi_equilibrium_exact", "tqfi_nstar")


def _plateau_probe_time(report):
    if report.window_open and math.isfinite(report.plateau_time):
        return report.plateau_time, report.plateau_window[0]
    return 100.0 * report.tau1, report.tau1


def nlevel_curve(config, n_excited):
    probe, nlevel = config["probe"], config["nlevel"]
    model = _model_from(probe, degeneracy=n_excited)
    times = grid_values(nlevel["time_grid"])
    series = qfi_time_series(model, times, nlevel["variant"], "ground", h=nlevel["fd_step"])
    report = prethermal_timescale(model, nlevel["variant"], "ground")
    t_plateau, _ = _plateau_probe_time(report)
    t_long = 100.0 * report.tau1 if math.isfinite(report.tau1) else times[-1]
    probes = qfi_time_series(model, [t_plateau, t_long], nlevel["variant"], "ground", h=nlevel["fd_step"])
    return {
        "degeneracy": n_excited,
        "model": model,
        "series": series,
        "report": report,
        "plateau_time": t_plateau,
        "plateau_qfi": float(probes.qfi[0]),
        "long_time": t_long,
        "long_time_qfi": float(probes.qfi[1]),
        "qfi_equilibrium": qfi_equilibrium_n(model.beta, model.nu, n_excited),
    }


def nlevel_tqfi_row(config, beta, n_excited):
    probe, nlevel = config["probe"], config["nlevel"]
    model = _model_from(probe, beta=beta, degeneracy=n_excited)
    v_rates = thermal_rates(v_model(probe["nu"], probe["delta"], probe["gamma"], beta))
    lepe = lepe_eigenvalues(v_rates, probe["delta"])
    report = prethermal_timescale(model, nlevel["variant"], "ground")
    t_probe, tau_pre = _plateau_probe_time(report)
    point = qfi_time_series(model, [t_probe], nlevel["variant"], "ground", h=nlevel["fd_step"])
    qfi_eq = qfi_equilibrium_n(beta, model.nu, n_excited)
    nstar = optimal_degeneracy(beta, model.nu)
    return {
        "beta": beta, "degeneracy": n_excited,
        "cfi_prethermal": point.cfi[0], "qfi_prethermal": point.qfi[0], "qfi_equilibrium": qfi_eq,
        "tau1_fixed": lepe.tau1, "tau2_fixed": lepe.tau2, "tau1_exact": report.tau1, "tau2_exact": tau_pre,
        "tcfi_prethermal_fixed": point.cfi[0] / lepe.tau2, "tcfi_prethermal_exact": point.cfi[0] / tau_pre,
        "tqfi_equilibrium_fixed": qfi_eq / lepe.tau1,
        "tqfi_equilibrium_exact": qfi_eq / report.tau1 if math.isfinite(report.tau1) else 0.0,
        "tqfi_nstar": nstar.qfi_continuous / lepe.tau1,
    }


def run_nlevel(config, out_dir):
    result = RunResult("nlevel", Path(out_dir))
    degeneracies = config["nlevel"]["degeneracies"]
    threads = config["threads"]
    print(f"📊 N-level QFI for N = {degeneracies} ({config['nlevel']['variant']} QME)")
    curves = _ordered_map(lambda n: nlevel_curve(config, n), degeneracies, threads)

    tol = config["tolerances"]
    plot_curves = []
    for curve in curves:
        n, series, report = curve["degeneracy"], curve["series"], curve["report"]
        rows = [
            {"t": t, "qfi": q, "cfi": c, "qfi_equilibrium": curve["qfi_equilibrium"]}
            for t, q, c in zip(series.times, series.qfi, series.cfi)
        ]
        footer = {
            "degeneracy": n,
            "tau1": report.tau1,
            "tau_prethermal": report.plateau_window[0],
            "window_open": report.window_open,
            "gap_ratio": report.gap_ratio,
            "plateau_time": curve["plateau_time"],
            "plateau_qfi": curve["plateau_qfi"],
            "long_time": curve["long_time"],
            "long_time_qfi": curve["long_time_qfi"],
            "fd_step": series.h,
            "propagation": series.method,
        }
        result.outputs.append(write_csv(result.out_dir / f"nlevel_qfi_N{n}.csv", NLEVEL_QFI_COLUMNS, rows, footer))
        result.summary[f"N{n}"] = {"plateau_qfi": curve["plateau_qfi"], "long_time_qfi": curve["long_time_qfi"],
                                   "qfi_equilibrium": curve["qfi_equilibrium"]}
        if n > 1 and math.isfinite(report.tau1):
            rel = abs(curve["long_time_qfi"] - curve["qfi_equilibrium"]) / curve["qfi_equilibrium"]
            if rel > tol["long_time"]:
                result.violations.append(f"N={n}: long-time QFI misses the equilibrium value by {rel:.2e}")
        print(f"  ✓ N={n}: plateau QFI={curve['plateau_qfi']:.6g}, long-time QFI={curve['long_time_qfi']:.6g}")
        plot_curves.append((f"N={n}", series.times, series.qfi))

    plateaus = {c["degeneracy"]: c["plateau_qfi"] for c in curves if c["degeneracy"] > 1 and c["report"].window_open}
    if len(plateaus) > 1:
        spread = max(plateaus.values()) / min(plateaus.values()) - 1.0
        result.summary["plateau_spread"] = spread
        if spread > tol["plateau_spread"]:
            result.violations.append(
                f"plateau QFI differs across N = {sorted(plateaus)} by {spread:.2%} > {tol['plateau_spread']:.0%}"
            )
        print(f"  ✓ plateau QFI spread across N = {sorted(plateaus)}: {spread:.2e}")

    betas = grid_values(config["nlevel"]["beta_grid"])
    jobs = [(float(beta), n) for beta in betas for n in degeneracies]
    rows = _ordered_map(lambda job: nlevel_tqfi_row(config, *job), jobs, threads)
    result.outputs.append(write_csv(result.out_dir / "nlevel_tqfi.csv", NLEVEL_TQFI_COLUMNS, rows))

    if config["output"]["plots"]:
        save_figure(result.out_dir / "nlevel_qfi.svg", plot_curves, "t", "QFI", logx=True)
    return result


# --- xi-bound ---
def run_xi_bound(config, out_dir):
    result = RunResult("xi-bound", Path(out_dir))
    sampling = config["sampling"]
    print(f"📊 Sampling {sampling['n']} candidate states (seed={sampling['seed']}, mode={sampling['mode']})")
    study = xi_bound_study(sampling["n"], sampling["seed"], mode=sampling["mode"],
                           grid_bins=sampling["grid_bins"], shard_size=sampling["shard_size"],
                           threads=config["threads"])
    result.outputs.append(write_csv(result.out_dir / "xi_samples.csv", XI_COLUMNS, study.rows()))

    edges = np.round(np.linspace(-0.5, 0.5, 21), 10)
    witnesses = witness_states()
    summary = dict(study.summary)
    summary["bins"] = xi_bin_ranges(study, edges)
    summary["witnesses"] = {name: {"xi": w.xi, "physical": w.physical} for name, w in witnesses.items()}
    path = result.out_dir / "xi_summary.json"
    with open(path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    result.outputs.append(path)
    result.summary = study.summary

    if not study.summary["bound_holds"]:
        result.violations.append(
            f"xi bound violated: {study.summary['xi_violations']} xi and "
            f"{study.summary['sigma0R_violations']} sigma0R violations"
        )
    print(f"  ✓ physical {study.summary['n_physical']}/{study.summary['n']}, "
          f"xi ∈ [{study.summary['xi_min']}, {study.summary['xi_max']}]")

    if config["output"]["plots"]:
        physical = study.table["physical"]
        step = max(1, int(physical.sum()) // 20000)
        save_figure(result.out_dir / "xi_bound.svg",
                    [("physical states", study.table["sigma0R"][physical][::step], study.table["xi"][physical][::step])],
                    "sigma0R", "xi", scatter=True)
    return result


# --- spectrum ---
SPECTRUM_COLUMNS = ("index", "re", "im", "tau")


def run_spectrum(config, out_dir):
    result = RunResult("spectrum", Path(out_dir))
    probe, settings = config["probe"], config["spectrum"]
    if settings["probe"] == "qubit":
        model = qubit_model(probe["nu"], probe["gamma"], probe["beta"])
    else:
        n = 2 if settings["probe"] == "v-model" else settings["degeneracy"]
        model = _model_from(probe, degeneracy=n)

    rates = thermal_rates(model)
    if settings["generator"] == "reduced":
        gen = unified_generator_v(rates, probe["delta"])
        initial = None
    else:
        gen = build_redfield_generator(model, settings["variant"])
        initial = initial_state("ground", model).rho
    system = general_eig(gen.matrix)
    eigenvalues = system.eigenvalues[np.lexsort((system.eigenvalues.imag, np.abs(system.eigenvalues.real)))]
    report = analyze_timescales(gen, initial=initial)

    rows = [
        {"index": i, "re": lam.real, "im": lam.imag, "tau": (1.0 / abs(lam.real)) if lam.real != 0 else math.inf}
        for i, lam in enumerate(eigenvalues)
    ]
    footer = {
        "probe": model.name, "generator": settings["generator"], "condition": system.condition,
        "tau1": report.tau1, "tau2": report.tau2, "tau3": report.tau3,
        "separation_ratio": report.separation_ratio, "window_open": report.window_open,
        "gap_ratio": report.gap_ratio, "plateau_fast": report.plateau_window[0], "plateau_slow": report.plateau_window[1],
        "improvement_factor": improvement_factor(report.plateau_window[1], report.plateau_window[0]),
        "non_relaxing_modes": report.non_relaxing_modes,
    }
    if model.degeneracy == 2:
        lepe = lepe_eigenvalues(rates, probe["delta"])
        rel = abs(report.tau1 - lepe.tau1) / lepe.tau1 if math.isfinite(lepe.tau1) else 0.0
        footer.update({"lepe_tau1": lepe.tau1, "lepe_tau2": lepe.tau2, "lepe_tau3": lepe.tau3,
                       "tau1_relative_error": rel,
                       "ratio_in_expected_range": 1e6 <= report.separation_ratio <= 1e7})
        limit = max(10.0 * probe["delta"] / probe["nu"], 1e-9)
        if rel > limit:
            result.violations.append(f"tau1 differs from the perturbative estimate by {rel:.2e} > {limit:.1e}")
    result.outputs.append(write_csv(result.out_dir / "spectrum.csv", SPECTRUM_COLUMNS, rows, footer))
    result.summary = {key: footer[key] for key in ("tau1", "tau2", "tau3", "separation_ratio")}
    print(f"  ✓ tau1={report.tau1:.6g}, tau2={report.tau2:.6g}, ratio={report.separation_ratio:.4g}")

    if config["output"]["plots"]:
        save_figure(result.out_dir / "spectrum.svg", [("eigenvalues", eigenvalues.real, eigenvalues.imag)],
                    "Re λ", "Im λ", scatter=True)
    return result


RUNNERS = {
    "dynamics": run_dynamics,
    "fisher-sweep": run_fisher_sweep,
    "nlevel": run_nlevel,
    "xi-bound": run_xi_bound,
    "spectrum": run_spectrum,
}


def run_experiment(config, out_dir):
    """파이프라인 실행 후 manifest 기록."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = RUNNERS[config.experiment](config, out_dir)
    result.outputs.append(write_manifest(result, config))
    return result
