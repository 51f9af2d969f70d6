"""
프로브 모델 (V-model / N-level / qubit), 열욕 스펙트럼, 열적 비율, Gibbs/초기 상태.

에너지 단위는 ν (기본 1), ħ = k_B = 1.
"""
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .sampling import assemble_candidate_matrix, is_physical

# --- 모델 제약 ---
MAX_QUASIDEGENERACY = 1e-2   # Δ/ν 상한
MAX_LEVELS = 25              # N 상한 (Liouvillian 차원 (N+1)²)
INITIAL_KINDS = ("ground", "maximally-mixed", "ambient-thermal", "custom")


@dataclass(frozen=True)
class SpectralDensity:
    """J(ω). 기본은 ohmic γω, function 을 주면 그 함수를 사용한다."""

    gamma: float
    kind: str = "ohmic"
    function: Optional[Callable[[float], float]] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"spectral density amplitude gamma must be > 0, got {self.gamma}")

    def __call__(self, omega):
        if omega < 0:
            return 0.0
        if self.function is not None:
            return float(self.function(omega))
        return self.gamma * omega

    def zero_frequency_rate(self, beta):
        """lim_{ω→0} J(ω)·n_B(ω) = J'(0)/β."""
        if math.isinf(beta):
            return 0.0
        if self.function is None:
            return self.gamma / beta
        eps = 1e-8
        return self(eps) / (beta * eps)


def bose_einstein(nu, beta):
    """n_B(ν) = 1/(e^{βν} − 1). β = ∞ 이면 0."""
    if not nu > 0:
        raise ValueError(f"frequency must be > 0, got {nu}")
    if not beta > 0:
        raise ValueError(f"inverse temperature must be > 0, got {beta}")
    if math.isinf(beta):
        return 0.0
    return 1.0 / math.expm1(beta * nu)


def coupling_operator(n_excited):
    """S = Σ_j (|0⟩⟨j| + |j⟩⟨0|): 모든 여기 준위가 같은 세기로 바닥과 결합."""
    s = np.zeros((n_excited + 1, n_excited + 1))
    s[0, 1:] = 1.0
    s[1:, 0] = 1.0
    return s


@dataclass(frozen=True, eq=False)
class ProbeModel:
    name: str
    energies: tuple
    spectral_density: SpectralDensity
    beta: float
    nu: float
    delta: float
    cluster_tol: float

    @property
    def degeneracy(self):
        return len(self.energies) - 1

    @property
    def dimension(self):
        return len(self.energies)

    @property
    def gamma(self):
        return self.spectral_density.gamma

    def hamiltonian(self):
        return np.diag(np.asarray(self.energies, dtype=float)).astype(complex)

    def coupling(self):
        return coupling_operator(self.degeneracy)

    def with_beta(self, beta):
        if not beta > 0:
            raise ValueError(f"inverse temperature must be > 0, got {beta}")
        return replace(self, beta=beta)


def _validate_model_parameters(nu, delta, gamma, beta, n_excited):
    if not nu > 0:
        raise ValueError(f"nu must be > 0, got {nu}")
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    if n_excited > 1 and delta / nu >= MAX_QUASIDEGENERACY:
        raise ValueError(f"quasidegeneracy requires delta/nu < {MAX_QUASIDEGENERACY}, got {delta / nu:.3g}")
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    if not 1 <= n_excited <= MAX_LEVELS:
        raise ValueError(
            f"N must be in [1, {MAX_LEVELS}] (Liouvillian dimension {(n_excited + 1) ** 2}), got {n_excited}"
        )


def nlevel_model(n_excited, nu=1.0, delta=1e-4, gamma=0.07, beta=4.0, cluster_tol=None,
                 spectral_function=None):
    """
    바닥 준위 + N 개의 준축퇴 여기 준위. 여기 준위는 ν − (N−1−j)Δ 로 등간격이고
    최상위 준위가 ν 에 놓인다 (N=2 → V-model, N=1 → qubit).
    """
    n_excited = int(n_excited)
    _validate_model_parameters(nu, delta, gamma, beta, n_excited)
    energies = (0.0,) + tuple(nu - (n_excited - 1 - j) * delta for j in range(n_excited))
    if cluster_tol is None:
        cluster_tol = 100 * delta if delta > 0 else 1e-12 * nu
    # 인접 간격 기준으로 체인 클러스터링하므로 Δ < cluster_tol 이면 manifold 전체가 묶인다
    if n_excited > 1 and delta >= cluster_tol:
        raise ValueError(f"cluster_tol {cluster_tol:g} must exceed the manifold spacing {delta:g}")
    if cluster_tol >= 0.5 * nu:
        raise ValueError(f"cluster_tol {cluster_tol:g} would merge the ground state into the excited manifold")
    name = {1: "qubit", 2: "v-model"}.get(n_excited, "n-level")
    return ProbeModel(
        name=name,
        energies=energies,
        spectral_density=SpectralDensity(gamma=gamma, function=spectral_function),
        beta=float(beta),
        nu=float(nu),
        delta=float(delta) if n_excited > 1 else 0.0,
        cluster_tol=float(cluster_tol),
    )


def v_model(nu=1.0, delta=1e-4, gamma=0.07, beta=4.0, cluster_tol=None):
    return nlevel_model(2, nu=nu, delta=delta, gamma=gamma, beta=beta, cluster_tol=cluster_tol)


def qubit_model(nu=1.0, gamma=0.07, beta=4.0):
    return nlevel_model(1, nu=nu, delta=0.0, gamma=gamma, beta=beta)


@dataclass(frozen=True)
class Rates:
    """V-model 열적 비율. k = 2J(ν)(n_B+1), φ = k(1 + 2e^{−βν})."""

    k: float
    phi: float
    nbar: float

    @property
    def drive(self):
        """(φ − k)/2 = k e^{−βν}."""
        return 0.5 * (self.phi - self.k)


def thermal_rates(model):
    nbar = bose_einstein(model.nu, model.beta)
    k = 2.0 * model.spectral_density(model.nu) * (nbar + 1.0)
    boltzmann = 0.0 if math.isinf(model.beta) else math.exp(-model.beta * model.nu)
    phi = k * (1.0 + 2.0 * boltzmann)
    if not k > 0 or phi < k:
        raise ValueError(f"rates violate k > 0 and phi >= k: k={k}, phi={phi}")
    return Rates(k=k, phi=phi, nbar=nbar)


def cluster_energies(energies, tol):
    """
    인접 간격이 tol 보다 작은 준위들을 하나의 manifold 로 묶고,
    각 manifold 의 최상위 에너지를 대표값으로 쓴다.
    """
    energies = np.asarray(energies, dtype=float)
    order = np.argsort(energies, kind="stable")
    clustered = energies.copy()
    group = [order[0]] if len(order) else []
    for prev, idx in zip(order[:-1], order[1:]):
        if energies[idx] - energies[prev] < tol:
            group.append(idx)
            continue
        clustered[group] = energies[group].max()
        group = [idx]
    if group:
        clustered[group] = energies[group].max()
    return clustered


def _boltzmann_weights(energies, beta):
    energies = np.asarray(energies, dtype=float)
    shifted = energies - energies.min()
    if math.isinf(beta):
        return (shifted == 0).astype(float)
    return np.exp(-beta * shifted)


def model_energies(model, clustered=False):
    if clustered:
        return cluster_energies(model.energies, model.cluster_tol)
    return np.asarray(model.energies, dtype=float)


def gibbs_state(model, clustered=False):
    """e^{−βH}/Z. clustered=True 이면 manifold 대표 에너지를 사용 (unified QME 의 고정점)."""
    weights = _boltzmann_weights(model_energies(model, clustered), model.beta)
    return np.diag(weights / weights.sum()).astype(complex)


def energy_variance(model, clustered=False):
    energies = model_energies(model, clustered)
    pops = np.real(np.diag(gibbs_state(model, clustered)))
    mean = float(pops @ energies)
    return float(pops @ energies**2 - mean**2)


def gibbs_derivative(model, clustered=False):
    """∂_β ρ_G = (⟨H⟩ − H) ρ_G."""
    energies = model_energies(model, clustered)
    pops = np.real(np.diag(gibbs_state(model, clustered)))
    mean = float(pops @ energies)
    return np.diag((mean - energies) * pops).astype(complex)


@dataclass(frozen=True, eq=False)
class InitialState:
    kind: str
    rho: np.ndarray
    p0: float
    sigma0R: float
    sigma0I: float

    @property
    def xi(self):
        """ξ = σ₀ᴿ − p₀ (V-model 보존량)."""
        return self.sigma0R - self.p0


def describe_state(kind, rho):
    rho = np.asarray(rho, dtype=complex)
    n_excited = rho.shape[0] - 1
    p0 = float(np.real(np.trace(rho)) - np.real(rho[0, 0])) / n_excited
    coherence = rho[2, 1] if n_excited >= 2 else 0.0
    return InitialState(kind=kind, rho=rho, p0=p0,
                        sigma0R=float(np.real(coherence)), sigma0I=float(np.imag(coherence)))


def initial_state(kind, model, beta_ambient=None, custom=None):
    """
    초기 상태 생성.

    Args:
        kind: "ground" | "maximally-mixed" | "ambient-thermal" | "custom"
        model: ProbeModel
        beta_ambient: ambient-thermal 에서 사용하는 주변 온도 β_A
        custom: custom 상태 파라미터 dict(p2, p3, a, b, sigma0R), V-model 전용
    """
    dim = model.dimension
    if kind == "ground":
        rho = np.zeros((dim, dim), dtype=complex)
        rho[0, 0] = 1.0
    elif kind == "maximally-mixed":
        rho = np.eye(dim, dtype=complex) / dim
    elif kind == "ambient-thermal":
        if beta_ambient is None or not beta_ambient > 0:
            raise ValueError(f"ambient-thermal initial state needs beta_ambient > 0, got {beta_ambient}")
        rho = gibbs_state(model.with_beta(beta_ambient), clustered=True)
    elif kind == "custom":
        if model.degeneracy != 2:
            raise ValueError("custom initial states are defined for the V model only")
        params = dict(custom or {})
        missing = {"p2", "p3", "a", "b", "sigma0R"} - params.keys()
        if missing:
            raise ValueError(f"custom initial state is missing {sorted(missing)}")
        rho = assemble_candidate_matrix(**{key: params[key] for key in ("p2", "p3", "a", "b", "sigma0R")})
        ok, diag = is_physical(rho)
        if not ok:
            raise ValueError(f"custom initial state is not a density matrix: min eigenvalue {diag['min_eig']:.3e}")
        rho = rho.astype(complex)
    else:
        raise ValueError(f"unknown initial state kind {kind!r}; expected one of {INITIAL_KINDS}")
    return describe_state(kind, rho)
