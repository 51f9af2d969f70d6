"""
ξ-bound Monte-Carlo: V-model 후보 밀도행렬을 무작위로 만들고 물리성 검사 후
ξ = σ₀ᴿ − (p₂+p₃)/2 의 범위를 집계한다.

난수는 numpy Generator(PCG64) + SeedSequence.spawn 으로 샤드별 독립 스트림을 쓴다.
샤드 크기는 스레드 수와 무관하게 고정이므로 같은 seed → 같은 표.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

# --- 샘플링 상수 ---
PHYSICALITY_TOL = 1e-12
BOUND_TOL = 1e-9
SHARD_SIZE = 50_000
GRID_BINS = 60
GRID_RANGE = (-0.75, 0.75)
COLUMNS = ("sigma0R", "p2", "p3", "a", "b", "xi", "physical", "min_eig")


def assemble_candidate_matrix(p2, p3, a, b, sigma0R):
    """
    ρ = [[1−p₂−p₃, a, b],
         [a,       p₂, σ₀ᴿ],
         [b,       σ₀ᴿ, p₃]]
    입력이 배열이면 (n, 3, 3) 스택을 돌려준다.
    """
    p2, p3, a, b, sigma0R = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (p2, p3, a, b, sigma0R)))
    rho = np.empty(p2.shape + (3, 3))
    rho[..., 0, 0] = 1.0 - p2 - p3
    rho[..., 0, 1] = rho[..., 1, 0] = a
    rho[..., 0, 2] = rho[..., 2, 0] = b
    rho[..., 1, 1] = p2
    rho[..., 2, 2] = p3
    rho[..., 1, 2] = rho[..., 2, 1] = sigma0R
    return rho


def is_physical(rho, tol=PHYSICALITY_TOL):
    """
    밀도행렬 여부 (Hermitian, trace 1, min eigenvalue ≥ −tol).

    Returns:
        (ok, diagnostics): diagnostics = {min_eig, purity, trace}
    """
    rho = np.asarray(rho)
    herm = rho.conj().T
    if np.max(np.abs(rho - herm)) > 1e-10:
        return False, {"min_eig": float("nan"), "purity": float("nan"),
                       "trace": float(np.real(np.trace(rho))), "reason": "not Hermitian"}
    eigs = np.linalg.eigvalsh(0.5 * (rho + herm))
    trace = float(eigs.sum())
    diagnostics = {"min_eig": float(eigs[0]), "purity": float(np.sum(eigs**2)), "trace": trace}
    if abs(trace - 1.0) > 1e-10:
        diagnostics["reason"] = "trace != 1"
        return False, diagnostics
    return bool(eigs[0] >= -tol), diagnostics


@dataclass(frozen=True)
class CandidateState:
    p2: float
    p3: float
    a: float
    b: float
    sigma0R: float
    physical: bool
    min_eig: float
    purity: float

    @property
    def xi(self):
        return self.sigma0R - 0.5 * (self.p2 + self.p3)

    def matrix(self):
        return assemble_candidate_matrix(self.p2, self.p3, self.a, self.b, self.sigma0R)


def make_candidate(p2, p3, a, b, sigma0R):
    ok, diag = is_physical(assemble_candidate_matrix(p2, p3, a, b, sigma0R))
    return CandidateState(float(p2), float(p3), float(a), float(b), float(sigma0R),
                          physical=ok, min_eig=diag["min_eig"], purity=diag["purity"])


def _map_uniforms(u):
    """u ∈ [0,1)^5 → (p₂, p₃, a, b, σ₀ᴿ): p 는 U[0,1], 나머지는 U[−1,1]."""
    return u[..., 0], u[..., 1], 2.0 * u[..., 2] - 1.0, 2.0 * u[..., 3] - 1.0, 2.0 * u[..., 4] - 1.0


def sample_candidate(rng):
    """하나의 후보 상태. rng 스트림 소비 순서는 배치 샘플링과 동일하다."""
    return make_candidate(*_map_uniforms(rng.random(5)))


@dataclass(frozen=True, eq=False)
class XiBoundStudy:
    """샘플 표 (열 단위 배열) + 요약."""

    table: dict
    summary: dict
    seed: int
    mode: str

    @property
    def n(self):
        return len(self.table["xi"])

    def rows(self):
        for i in range(self.n):
            yield {name: self.table[name][i] for name in COLUMNS}


def _sample_shard(child_seed, offset, count, mode, grid):
    rng = np.random.Generator(np.random.PCG64(child_seed))
    u = rng.random((count, 5))
    p2, p3, a, b, sigma = _map_uniforms(u)
    if mode == "grid":
        sigma = grid[(offset + np.arange(count)) % len(grid)]
    rho = assemble_candidate_matrix(p2, p3, a, b, sigma)
    min_eig = np.linalg.eigvalsh(rho)[:, 0] if count else np.empty(0)
    return {
        "sigma0R": np.asarray(sigma, dtype=float),
        "p2": p2,
        "p3": p3,
        "a": a,
        "b": b,
        "xi": sigma - 0.5 * (p2 + p3),
        "physical": min_eig >= -PHYSICALITY_TOL,
        "min_eig": min_eig,
    }


def xi_bound_study(n, seed, mode="uniform", grid_bins=GRID_BINS, grid_range=GRID_RANGE,
                   shard_size=SHARD_SIZE, threads=1):
    """
    n 개의 후보를 샘플링해 ξ ∈ [−1, 0] 및 |σ₀ᴿ| ≤ 1/2 를 검증한다.

    Args:
        n: 후보 수 (0 이면 빈 표와 빈 요약)
        seed: 64-bit seed
        mode: "uniform" (σ₀ᴿ ~ U[−1,1]) 또는 "grid" (σ₀ᴿ 를 grid_bins 개 격자값에 순환 배치)
        threads: 샤드 병렬 처리 스레드 수 (결과에는 영향 없음)
    """
    if n < 0:
        raise ValueError(f"sample count must be >= 0, got {n}")
    if mode not in ("uniform", "grid"):
        raise ValueError(f"sampling mode must be 'uniform' or 'grid', got {mode!r}")
    if shard_size < 1:
        raise ValueError("shard_size must be >= 1")
    grid = np.linspace(grid_range[0], grid_range[1], grid_bins)

    n_shards = -(-n // shard_size)
    children = np.random.SeedSequence(seed).spawn(n_shards)
    jobs = [(children[i], i * shard_size, min(shard_size, n - i * shard_size)) for i in range(n_shards)]

    if threads > 1 and n_shards > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            parts = list(executor.map(lambda job: _sample_shard(*job, mode, grid), jobs))
    else:
        parts = [_sample_shard(*job, mode, grid) for job in jobs]

    if parts:
        table = {name: np.concatenate([part[name] for part in parts]) for name in COLUMNS}
    else:
        table = {name: np.empty(0, dtype=bool if name == "physical" else float) for name in COLUMNS}
    return XiBoundStudy(table=table, summary=summarize(table), seed=int(seed), mode=mode)


def summarize(table):
    physical = table["physical"]
    xi = table["xi"][physical]
    sigma = table["sigma0R"][physical]
    summary = {
        "n": int(len(table["xi"])),
        "n_physical": int(physical.sum()),
        "xi_min": float(xi.min()) if xi.size else None,
        "xi_max": float(xi.max()) if xi.size else None,
        "sigma0R_min": float(sigma.min()) if sigma.size else None,
        "sigma0R_max": float(sigma.max()) if sigma.size else None,
        "xi_violations": int(np.sum((xi < -1.0 - BOUND_TOL) | (xi > BOUND_TOL))),
        "sigma0R_violations": int(np.sum(np.abs(sigma) > 0.5 + BOUND_TOL)),
    }
    summary["bound_holds"] = summary["xi_violations"] == 0 and summary["sigma0R_violations"] == 0
    return summary


def xi_bin_ranges(study, edges):
    """
    σ₀ᴿ 구간별 물리적 ξ 범위. 빈 구간은 span 0.

    Returns:
        list of dict(lo, hi, count, xi_min, xi_max, span)
    """
    physical = study.table["physical"]
    sigma = study.table["sigma0R"][physical]
    xi = study.table["xi"][physical]
    ranges = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (sigma >= lo) & (sigma <= hi)
        if mask.any():
            lo_xi, hi_xi = float(xi[mask].min()), float(xi[mask].max())
        else:
            lo_xi = hi_xi = None
        ranges.append({
            "lo": float(lo),
            "hi": float(hi),
            "count": int(mask.sum()),
            "xi_min": lo_xi,
            "xi_max": hi_xi,
            "span": (hi_xi - lo_xi) if mask.any() else 0.0,
        })
    return ranges


def witness_states():
    """경계 ξ = 0 (바닥 상태) 과 ξ = −1 (반대칭 상태) 에 도달하는 물리적 후보."""
    return {
        "ground": make_candidate(0.0, 0.0, 0.0, 0.0, 0.0),
        "antisymmetric": make_candidate(0.5, 0.5, 0.0, 0.0, -0.5),
    }
