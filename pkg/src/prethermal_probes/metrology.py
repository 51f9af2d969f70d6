"""
온도 추정 정밀도: 고전/양자 Fisher 정보, SLD, 시간 가중 Fisher 정보, 정밀도 한계.

ν 가 에너지 단위이므로 해석식은 ν² 배율을 포함한다.
"""
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dynamics import (
    analyze_timescales,
    build_redfield_generator,
    check_xi,
    evolve,
    prethermal_state,
    reduced_to_density_matrix,
)
from .errors import InvariantViolation
from .numerics import hermitian_eig
from .probes import initial_state

POPULATION_CUTOFF = 1e-14
SUPPORT_TOL = 1e-8
FD_RELATIVE_STEP = 1e-5
CFI_SLACK = 1e-10
FISHER_METHODS = ("analytic", "numeric-sld", "numeric-population")


@dataclass(frozen=True)
class FisherReport:
    beta: float
    cfi: float
    qfi: float
    tau_used: float
    method: str
    series: str = ""
    derivative_step: Optional[float] = None

    def __post_init__(self):
        if self.method not in FISHER_METHODS:
            raise ValueError(f"unknown Fisher method {self.method!r}")
        if not self.tau_used > 0:
            raise ValueError(f"tau_used must be > 0, got {self.tau_used}")
        if self.cfi < -1e-12 or self.cfi > self.qfi + CFI_SLACK:
            raise InvariantViolation(
                f"{self.series or 'report'} at beta={self.beta}: expected 0 <= CFI ({self.cfi:.6e}) "
                f"<= QFI ({self.qfi:.6e})"
            )

    @property
    def tcfi(self):
        return self.cfi / self.tau_used

    @property
    def tqfi(self):
        return self.qfi / self.tau_used


@dataclass(frozen=True, eq=False)
class SLD:
    matrix: np.ndarray
    support_dimension: int
    residual: float


# --- 고전 Fisher 정보 ---
def cfi_from_populations(p, dp, cutoff=POPULATION_CUTOFF):
    """F = Σ_k (∂p_k)²/p_k, p_k ≤ cutoff 인 항은 제외."""
    p = np.real_if_close(np.asarray(p, dtype=complex)).astype(float)
    dp = np.real_if_close(np.asarray(dp, dtype=complex)).astype(float)
    if p.shape != dp.shape:
        raise ValueError(f"population and derivative shapes differ: {p.shape} vs {dp.shape}")
    if np.any(p < -1e-12):
        raise ValueError(f"negative population {p.min():.3e}")
    if abs(p.sum() - 1.0) > 1e-10:
        raise ValueError(f"populations sum to {p.sum():.12f}, expected 1")
    if abs(dp.sum()) > 1e-9:
        raise ValueError(f"population derivatives sum to {dp.sum():.3e}, expected 0")
    keep = p > cutoff
    return float(np.sum(dp[keep] ** 2 / p[keep]))


# --- SLD / 양자 Fisher 정보 ---
def sld(rho, drho, cutoff=POPULATION_CUTOFF, support_tol=SUPPORT_TOL):
    """
    ∂ρ = (Lρ + ρL)/2 를 ρ 의 고유기저에서 풀어 SLD L 을 구한다.

    d_j + d_k ≤ cutoff 인 쌍은 L_jk = 0 으로 두고, 그 위치의 |∂ρ_jk| 가 support_tol 을
    넘으면 (∂ρ 가 ρ 의 support 밖으로 나감) ValueError.
    """
    rho = np.asarray(rho, dtype=complex)
    drho = np.asarray(drho, dtype=complex)
    if rho.shape != drho.shape:
        raise ValueError(f"state and derivative shapes differ: {rho.shape} vs {drho.shape}")
    if np.max(np.abs(drho - drho.conj().T)) > 1e-9 * max(1.0, float(np.max(np.abs(drho)))):
        raise ValueError("state derivative must be Hermitian")
    system = hermitian_eig(rho, tol=1e-10)
    d, u = system.eigenvalues, system.right
    d_eig = u.conj().T @ drho @ u
    denom = d[:, None] + d[None, :]
    inside = denom > cutoff

    outside = np.abs(np.where(inside, 0.0, d_eig))
    if outside.size and outside.max() > support_tol:
        j, k = np.unravel_index(int(np.argmax(outside)), outside.shape)
        raise ValueError(
            f"derivative leaves the support of rho: |d rho_{j}{k}| = {outside[j, k]:.3e} "
            f"with d_{j} + d_{k} = {denom[j, k]:.3e}"
        )

    l_eig = np.zeros_like(d_eig)
    l_eig[inside] = 2.0 * d_eig[inside] / denom[inside]
    support = d > cutoff
    lyapunov = d_eig - 0.5 * (l_eig * d[None, :] + d[:, None] * l_eig)
    residual = float(np.max(np.abs(lyapunov[np.ix_(support, support)]))) if support.any() else 0.0

    matrix = u @ l_eig @ u.conj().T
    matrix = 0.5 * (matrix + matrix.conj().T)
    return SLD(matrix=matrix, support_dimension=int(support.sum()), residual=residual)


def qfi_from_state(rho, drho, cutoff=POPULATION_CUTOFF):
    """F_Q = Tr[ρ L²]."""
    rho = np.asarray(rho, dtype=complex)
    l_op = sld(rho, drho, cutoff=cutoff).matrix
    return max(float(np.real(np.trace(rho @ l_op @ l_op))), 0.0)


# --- 해석식 ---
def _boltzmann(beta, nu):
    if not beta > 0 or not nu > 0:
        raise ValueError(f"beta and nu must be > 0, got beta={beta}, nu={nu}")
    return 0.0 if math.isinf(beta) else math.exp(-beta * nu)


def qfi_prethermal_analytic(beta, nu, xi):
    """F_Q = ν² e^{βν}(1+ξ)/(1+e^{βν})²."""
    check_xi(xi)
    e = _boltzmann(beta, nu)
    return nu**2 * (1.0 + xi) * e / (1.0 + e) ** 2


def cfi_prethermal_analytic(beta, nu, xi):
    """에너지 기저 측정의 F_C = F_Q / (1 − ξ e^{βν})."""
    check_xi(xi)
    e = _boltzmann(beta, nu)
    # 1/(1 − ξE) = e/(e − ξ); ξ = 0 이면 1
    damping = 1.0 if xi == 0 else e / (e - xi)
    return nu**2 * (1.0 + xi) * e / (1.0 + e) ** 2 * damping


def qfi_equilibrium_v(beta, nu):
    """V-model 평형 (준축퇴 극한) F_Q = 2ν² e^{βν}/(2+e^{βν})²."""
    e = _boltzmann(beta, nu)
    return 2.0 * nu**2 * e / (1.0 + 2.0 * e) ** 2


def qfi_equilibrium_n(beta, nu, n):
    """N 중 축퇴 여기 준위의 평형 F_Q = ν² N e^{βν}/(N+e^{βν})²."""
    if not n >= 1:
        raise ValueError(f"degeneracy must be >= 1, got {n}")
    e = _boltzmann(beta, nu)
    return nu**2 * n * e / (1.0 + n * e) ** 2


@dataclass(frozen=True)
class OptimalDegeneracy:
    n_continuous: float
    n_integer: int
    qfi_continuous: float
    qfi_integer: float


def optimal_degeneracy(beta, nu):
    """N* = e^{βν} 에서 F_Q = ν²/4; 정수 N* 는 floor/ceil 중 F_Q 가 큰 쪽."""
    n_cont = math.exp(beta * nu)
    candidates = sorted({max(1, math.floor(n_cont)), max(1, math.ceil(n_cont))})
    best = max(candidates, key=lambda n: (qfi_equilibrium_n(beta, nu, n), -n))
    return OptimalDegeneracy(
        n_continuous=n_cont,
        n_integer=int(best),
        qfi_continuous=qfi_equilibrium_n(beta, nu, n_cont),
        qfi_integer=qfi_equilibrium_n(beta, nu, best),
    )


def prethermal_derivative(beta, nu, xi):
    """∂_β p̃ = ∂_β σ̃ = −(1+ξ) ν e^{−βν} / (2(1+e^{−βν})²)."""
    check_xi(xi)
    e = _boltzmann(beta, nu)
    value = -(1.0 + xi) * nu * e / (2.0 * (1.0 + e) ** 2)
    return value, value


def prethermal_derivative_matrix(beta, nu, xi):
    dp, dsigma = prethermal_derivative(beta, nu, xi)
    rho = reduced_to_density_matrix(dp, dsigma)
    rho[0, 0] = -2.0 * dp
    return rho


# --- 시간 가중 / 정밀도 ---
def time_weighted(fisher, tau):
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    return fisher / tau


def precision_bound(fisher, repetitions=1):
    """δβ ≥ 1/√(M F). F = 0 이면 ∞."""
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")
    if fisher < 0:
        raise ValueError(f"Fisher information must be >= 0, got {fisher}")
    if fisher == 0:
        return math.inf
    return 1.0 / math.sqrt(repetitions * fisher)


def improvement_factor(tau1, tau2):
    """τ₁/τ₂ 분리로 얻는 δβ 개선 배율 √(τ₁/τ₂)."""
    if not tau1 > 0 or not tau2 > 0:
        raise ValueError("timescales must be > 0")
    return math.sqrt(tau1 / tau2)


# --- 수치 미분 ---
def dstate_dbeta(builder: Callable[[float], np.ndarray], beta, h=None):
    """중앙 차분 (ρ(β+h) − ρ(β−h))/2h, Hermitian 대칭화. 기본 h = 1e-5·β."""
    h = FD_RELATIVE_STEP * beta if h is None else h
    if not 0 < h < beta:
        raise ValueError(f"finite-difference step must satisfy 0 < h < beta, got h={h}")
    diff = (np.asarray(builder(beta + h), dtype=complex) - np.asarray(builder(beta - h), dtype=complex)) / (2.0 * h)
    diff = 0.5 * (diff + diff.conj().T)
    trace = abs(np.trace(diff))
    if trace > 1e-9:
        raise ValueError(f"state derivative is not traceless: |Tr| = {trace:.3e}")
    return diff


# --- Fisher 리포트 ---
def prethermal_fisher(beta, nu, xi, tau, method="analytic", series="", h=None):
    """prethermal 상태의 CFI/QFI 리포트. numeric-sld 는 유한 차분 + SLD."""
    if method == "analytic":
        return FisherReport(beta=beta, cfi=cfi_prethermal_analytic(beta, nu, xi),
                            qfi=qfi_prethermal_analytic(beta, nu, xi), tau_used=tau,
                            method=method, series=series)
    if method != "numeric-sld":
        raise ValueError(f"prethermal Fisher method must be 'analytic' or 'numeric-sld', got {method!r}")
    h = FD_RELATIVE_STEP * beta if h is None else h
    builder = lambda b: prethermal_state(b, nu, xi).matrix()
    rho = builder(beta)
    drho = dstate_dbeta(builder, beta, h)
    return FisherReport(
        beta=beta,
        cfi=cfi_from_populations(np.diag(rho), np.diag(drho)),
        qfi=qfi_from_state(rho, drho),
        tau_used=tau,
        method=method,
        series=series,
        derivative_step=h,
    )


def equilibrium_fisher(beta, nu, tau, degeneracy=2, series=""):
    """열평형에서는 에너지 측정이 최적이므로 CFI = QFI."""
    qfi = qfi_equilibrium_v(beta, nu) if degeneracy == 2 else qfi_equilibrium_n(beta, nu, degeneracy)
    return FisherReport(beta=beta, cfi=qfi, qfi=qfi, tau_used=tau, method="analytic", series=series)


@dataclass(frozen=True, eq=False)
class FisherTimeSeries:
    times: np.ndarray
    qfi: np.ndarray
    cfi: np.ndarray
    h: float
    method: str


def qfi_time_series(model, times, variant="unified", init_kind="ground", beta_ambient=None, h=None):
    """
    Redfield 전개 상태 ρ_β(t) 의 QFI/CFI. β±h 두 번의 전개로 ∂_β ρ(t) 를 만든다.
    """
    beta = model.beta
    h = FD_RELATIVE_STEP * beta if h is None else h
    rho0 = initial_state(init_kind, model, beta_ambient=beta_ambient).rho
    centre = evolve(build_redfield_generator(model, variant), rho0, times)
    plus = evolve(build_redfield_generator(model.with_beta(beta + h), variant), rho0, times)
    minus = evolve(build_redfield_generator(model.with_beta(beta - h), variant), rho0, times)

    qfi = np.empty(len(centre.times))
    cfi = np.empty(len(centre.times))
    for i, rho in enumerate(centre.states):
        rho = 0.5 * (rho + rho.conj().T)
        drho = (plus.states[i] - minus.states[i]) / (2.0 * h)
        drho = 0.5 * (drho + drho.conj().T)
        qfi[i] = qfi_from_state(rho, drho)
        pops = np.clip(np.real(np.diag(rho)), 0.0, None)
        pops = pops / pops.sum()
        dpops = np.real(np.diag(drho))
        # 전파 오차로 남는 trace 성분 제거
        dpops = dpops - pops * dpops.sum()
        cfi[i] = cfi_from_populations(pops, dpops)
    excess = cfi - qfi
    if len(excess) and excess.max() > CFI_SLACK:
        worst = int(np.argmax(excess))
        raise InvariantViolation(
            f"CFI exceeds QFI by {excess[worst]:.3e} at t={centre.times[worst]:.6g} (N={model.degeneracy})"
        )
    return FisherTimeSeries(times=centre.times, qfi=qfi, cfi=cfi, h=h, method=centre.method)


def prethermal_timescale(model, variant="unified", init_kind="ground", beta_ambient=None):
    """plateau 구간과 τ₁ 을 스펙트럼에서 얻는다 (N-level 그림용)."""
    gen = build_redfield_generator(model, variant)
    rho0 = initial_state(init_kind, model, beta_ambient=beta_ambient).rho
    return analyze_timescales(gen, initial=rho0)
