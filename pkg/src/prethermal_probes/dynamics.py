"""
V-model 의 unified QME 축약 생성자, 닫힌 형태 해, LEPE 고유값, prethermal 상태,
그리고 임의 프로브에 대한 Bloch-Redfield 생성자 / 시간 전개 / 시간 척도 분석.

Vectorization 규약: row-major, vec(ρ)[a·d + b] = ρ[a, b].
V-model 좌표: p = (ρ₁₁+ρ₂₂)/2, σ = ρ₂₁ = σᴿ + iσᴵ.
"""
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import NumericalError
from .numerics import general_eig, hermiticity_error, propagate_spectral, propagate_stepwise
from .probes import ProbeModel, Rates, bose_einstein, gibbs_state, model_energies

REDFIELD_VARIANTS = ("unified", "full-secular", "nonsecular")
REDUCED_BASIS = "reduced-v-model"
VECTORIZED_BASIS = "vectorized-density-matrix"


# --- 상태 타입 ---
@dataclass(frozen=True)
class ReducedState:
    p: float
    sigmaR: float
    sigmaI: float = 0.0

    def as_vector(self):
        """동차 좌표 (p, σᴿ, σᴵ, 1)."""
        return np.array([self.p, self.sigmaR, self.sigmaI, 1.0])

    def density_matrix(self):
        return reduced_to_density_matrix(self.p, self.sigmaR, self.sigmaI)

    @property
    def xi(self):
        return self.sigmaR - self.p

    @classmethod
    def from_density_matrix(cls, rho):
        rho = np.asarray(rho)
        if rho.shape != (3, 3):
            raise ValueError(f"V-model coordinates need a 3x3 density matrix, got {rho.shape}")
        return cls(p=float(np.real(rho[1, 1] + rho[2, 2])) / 2,
                   sigmaR=float(np.real(rho[2, 1])),
                   sigmaI=float(np.imag(rho[2, 1])))


def reduced_to_density_matrix(p, sigmaR, sigmaI=0.0):
    p, sigmaR, sigmaI = np.broadcast_arrays(np.asarray(p, float), np.asarray(sigmaR, float),
                                            np.asarray(sigmaI, float))
    rho = np.zeros(p.shape + (3, 3), dtype=complex)
    rho[..., 0, 0] = 1.0 - 2.0 * p
    rho[..., 1, 1] = p
    rho[..., 2, 2] = p
    rho[..., 2, 1] = sigmaR + 1j * sigmaI
    rho[..., 1, 2] = sigmaR - 1j * sigmaI
    return rho


@dataclass(frozen=True, eq=False)
class Generator:
    """dv/dt = matrix · v."""

    matrix: np.ndarray
    basis: str
    reference_state: np.ndarray
    model: Optional[ProbeModel] = None
    rates: Optional[Rates] = None
    variant: Optional[str] = None

    @property
    def dimension(self):
        return self.matrix.shape[0]

    @property
    def hilbert_dimension(self):
        if self.basis == REDUCED_BASIS:
            return 3
        return int(round(math.sqrt(self.dimension)))


# --- 축약 V-model 생성자 ---
def unified_generator_v(rates, delta):
    """
    (p, σᴿ, σᴵ, 1) 동차 좌표의 4x4 생성자:

        ṗ  = −φp − kσᴿ + (φ−k)/2
        σ̇ᴿ = −φp − kσᴿ + Δσᴵ + (φ−k)/2
        σ̇ᴵ = −Δσᴿ − kσᴵ
    """
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    k, phi = rates.k, rates.phi
    c = rates.drive
    matrix = np.array([
        [-phi, -k, 0.0, c],
        [-phi, -k, delta, c],
        [0.0, -delta, -k, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ])
    stationary = np.array([c / phi, 0.0, 0.0, 1.0])
    return Generator(matrix=matrix, basis=REDUCED_BASIS, reference_state=stationary, rates=rates)


class LepeEigenvalues(NamedTuple):
    """최저차 섭동 고유값 λ₁ (느린 모드), λ₂ = −k, λ₃ = −(φ+k)."""

    lambda1: float
    lambda2: float
    lambda3: float

    @staticmethod
    def _tau(lam):
        return math.inf if lam == 0 else 1.0 / abs(lam)

    @property
    def tau1(self):
        return self._tau(self.lambda1)

    @property
    def tau2(self):
        return self._tau(self.lambda2)

    @property
    def tau3(self):
        return self._tau(self.lambda3)

    @property
    def separation_ratio(self):
        return self.tau1 / self.tau2


def lepe_eigenvalues(rates, delta):
    k, phi = rates.k, rates.phi
    lambda1 = -phi * delta**2 / (k * (k + phi))
    return LepeEigenvalues(lambda1=lambda1, lambda2=-k, lambda3=-(phi + k))


def _closed_form_amplitudes(rates, init):
    k, phi = rates.k, rates.phi
    slow = phi * (1.0 + 2.0 * init.sigmaR - 2.0 * init.p) - k
    fast = phi * (1.0 - 2.0 * init.p) - k * (1.0 + 2.0 * init.sigmaR)
    return slow, fast


def closed_form_evolution(rates, delta, init, t):
    """
    LEPE 근사의 닫힌 형태 해 (p(t), σᴿ(t)); σᴵ 는 O(Δ) 이므로 0 으로 둔다.
    t 가 배열이면 배열 필드를 가진 ReducedState 를 돌려준다.
    """
    k, phi = rates.k, rates.phi
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    lam1 = lepe_eigenvalues(rates, delta).lambda1
    slow, fast = _closed_form_amplitudes(rates, init)
    e_slow = np.exp(lam1 * t)
    e_fast = np.exp(-(phi + k) * t)
    denom = 2.0 * (phi + k)
    sigma = (slow * e_slow - fast * e_fast) / denom
    p = (phi - k) / (2.0 * phi) - ((k / phi) * slow * e_slow + fast * e_fast) / denom
    if t.ndim == 0:
        return ReducedState(p=float(p), sigmaR=float(sigma), sigmaI=0.0)
    return ReducedState(p=p, sigmaR=sigma, sigmaI=np.zeros_like(p))


def closed_form_derivative(rates, delta, init, t):
    """closed_form_evolution 의 시간 미분 (ṗ, σ̇ᴿ)."""
    k, phi = rates.k, rates.phi
    t = np.asarray(t, dtype=float)
    lam1 = lepe_eigenvalues(rates, delta).lambda1
    slow, fast = _closed_form_amplitudes(rates, init)
    d_slow = lam1 * np.exp(lam1 * t)
    d_fast = -(phi + k) * np.exp(-(phi + k) * t)
    denom = 2.0 * (phi + k)
    d_sigma = (slow * d_slow - fast * d_fast) / denom
    d_p = -((k / phi) * slow * d_slow + fast * d_fast) / denom
    return d_p, d_sigma


# --- prethermal 상태 ---
@dataclass(frozen=True)
class PrethermalState:
    """
    Prethermal 정체(plateau) 상태:
        p̃ = (e^{−βν} − ξ) / (2(1+e^{−βν}))
        σ̃ = (e^{−βν} + ξ(1+2e^{−βν})) / (2(1+e^{−βν}))
    """

    p_tilde: float
    sigma_tilde: float
    xi: float
    beta: float
    nu: float

    def matrix(self):
        return np.real(reduced_to_density_matrix(self.p_tilde, self.sigma_tilde))

    def eigenvalues(self):
        """(바닥, 대칭 여기, 반대칭 여기) = ((1+ξ)/(1+e), e(1+ξ)/(1+e), −ξ)."""
        return (1.0 - 2.0 * self.p_tilde, self.p_tilde + self.sigma_tilde, self.p_tilde - self.sigma_tilde)


XI_SLACK = 1e-12


def check_xi(xi):
    if not -1.0 - XI_SLACK <= xi <= XI_SLACK:
        raise ValueError(f"xi must lie in [-1, 0], got {xi}")


def prethermal_state(beta, nu, xi):
    if not beta > 0 or not nu > 0:
        raise ValueError(f"beta and nu must be > 0, got beta={beta}, nu={nu}")
    check_xi(xi)
    e = 0.0 if math.isinf(beta) else math.exp(-beta * nu)
    norm = 2.0 * (1.0 + e)
    return PrethermalState(
        p_tilde=(e - xi) / norm,
        sigma_tilde=(e + xi * (1.0 + 2.0 * e)) / norm,
        xi=float(xi),
        beta=float(beta),
        nu=float(nu),
    )


# --- Bloch-Redfield 생성자 ---
def _transition_rate(model, omega, zero_tol):
    """Γ(ω): ω>0 은 방출 J(ω)(n+1), ω<0 은 흡수 J(|ω|)n(|ω|), ω≈0 은 J'(0)/β."""
    density = model.spectral_density
    if abs(omega) <= zero_tol:
        return density.zero_frequency_rate(model.beta)
    if omega > 0:
        return density(omega) * (bose_einstein(omega, model.beta) + 1.0)
    return density(-omega) * bose_einstein(-omega, model.beta)


def _secular_mask(variant, energies, tol):
    d = len(energies)
    bohr = np.subtract.outer(energies, energies).reshape(-1)   # ω_ab = E_a − E_b
    if variant == "nonsecular":
        return np.ones((d * d, d * d), dtype=bool)
    if variant == "unified":
        return np.abs(np.subtract.outer(bohr, bohr)) < tol
    idx = np.arange(d)
    a, b = np.repeat(idx, d), np.tile(idx, d)
    populations = a == b
    return np.logical_or(np.outer(populations, populations), np.eye(d * d, dtype=bool))


def build_redfield_generator(model, variant="unified", hamiltonian=None):
    """
    Born-Markov Redfield 생성자 (Lamb shift 제외), row-major vectorized.

    variant:
        "unified"     : cluster_tol 로 묶은 manifold 에너지로 비율과 secular 마스크를 정함
        "full-secular": population↔population 과 coherence 자기항만 유지
        "nonsecular"  : 마스크 없음, 정확한 Bohr 주파수 사용
    """
    if variant not in REDFIELD_VARIANTS:
        raise ValueError(f"unknown Redfield variant {variant!r}; expected one of {REDFIELD_VARIANTS}")
    h = model.hamiltonian() if hamiltonian is None else np.asarray(hamiltonian, dtype=complex)
    if h.shape != (model.dimension, model.dimension):
        raise ValueError(f"Hamiltonian shape {h.shape} does not match the probe dimension {model.dimension}")
    off_diagonal = h - np.diag(np.diag(h))
    if np.max(np.abs(off_diagonal)) > 1e-12:
        raise ValueError("Redfield construction needs a Hamiltonian diagonal in the energy basis")
    s = model.coupling()
    if hermiticity_error(s) > 1e-12:
        raise ValueError("system-bath coupling operator must be Hermitian")

    exact = np.real(np.diag(h))
    rate_energies = model_energies(model, clustered=True) if variant == "unified" else exact
    d = model.dimension
    zero_tol = model.cluster_tol if variant == "unified" else 1e-12 * max(model.nu, 1.0)

    # Λ_mn = S_mn Γ(E_n − E_m)
    lam = np.zeros((d, d), dtype=complex)
    for m in range(d):
        for n in range(d):
            if s[m, n] != 0:
                lam[m, n] = s[m, n] * _transition_rate(model, rate_energies[n] - rate_energies[m], zero_tol)

    eye = np.eye(d)
    s_lam = s @ lam
    lam_dag_s = lam.conj().T @ s
    # D(ρ) = −SΛρ + ΛρS + SρΛ† − ρΛ†S
    dissipator = (
        -np.kron(s_lam, eye)
        + np.kron(lam, s.T)
        + np.kron(s, lam.conj())
        - np.kron(eye, lam_dag_s.T)
    )
    coherent = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    mask = _secular_mask(variant, rate_energies, model.cluster_tol)
    matrix = coherent + np.where(mask, dissipator, 0.0)

    return Generator(
        matrix=matrix,
        basis=VECTORIZED_BASIS,
        reference_state=gibbs_state(model, clustered=(variant == "unified")),
        model=model,
        variant=variant,
    )


def _v_basis():
    e0 = np.diag([1.0, 0.0, 0.0]).astype(complex)
    ep = np.diag([-2.0, 1.0, 1.0]).astype(complex)
    er = np.zeros((3, 3), dtype=complex)
    er[2, 1] = er[1, 2] = 1.0
    ei = np.zeros((3, 3), dtype=complex)
    ei[2, 1], ei[1, 2] = 1j, -1j
    return e0, ep, er, ei


def restrict_to_v_coordinates(gen):
    """3-level vectorized 생성자를 (p, σᴿ, σᴵ, 1) 동차 좌표의 4x4 행렬로 사영."""
    if gen.basis != VECTORIZED_BASIS or gen.dimension != 9:
        raise ValueError("restriction needs a vectorized 3-level generator")
    e0, ep, er, ei = _v_basis()

    def project(basis_matrix):
        drho = (gen.matrix @ basis_matrix.reshape(-1)).reshape(3, 3)
        return [np.real(drho[1, 1] + drho[2, 2]) / 2, np.real(drho[2, 1]), np.imag(drho[2, 1])]

    reduced = np.zeros((4, 4))
    for col, basis_matrix in enumerate((ep, er, ei, e0)):
        reduced[:3, col] = project(basis_matrix)
    return reduced


def check_generator(gen, tol=1e-10):
    """Trace 보존과 Re λ ≤ tol 검사. 위반 메시지 리스트를 돌려준다."""
    problems = []
    scale = max(1.0, float(np.max(np.abs(gen.matrix))))
    if gen.basis == VECTORIZED_BASIS:
        trace_row = np.eye(gen.hilbert_dimension).reshape(-1) @ gen.matrix
        leak = float(np.max(np.abs(trace_row)))
        if leak > 1e-12 * scale:
            problems.append(f"trace not preserved: |vec(I)ᵀG| = {leak:.3e}")
    elif np.any(gen.matrix[-1] != 0):
        problems.append("homogeneous row of the reduced generator is not zero")
    eigenvalues = general_eig(gen.matrix).eigenvalues
    worst = float(np.max(eigenvalues.real))
    if worst > tol:
        problems.append(f"eigenvalue with positive real part {worst:.3e}")
    return problems


# --- 시간 전개 ---
@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray           # (T, d, d)
    method: str
    condition: float
    min_eigs: np.ndarray
    trace_errors: np.ndarray
    hermiticity_errors: np.ndarray

    def excited_mean(self):
        """평균 여기 준위 population p."""
        d = self.states.shape[1]
        return np.real(np.trace(self.states, axis1=1, axis2=2) - self.states[:, 0, 0]) / (d - 1)

    def coherence(self):
        """σ = ρ₂₁ (여기 준위가 둘 이상일 때)."""
        if self.states.shape[1] < 3:
            return np.zeros(len(self.times), dtype=complex)
        return self.states[:, 2, 1]

    def ground_population(self):
        return np.real(self.states[:, 0, 0])


def _initial_vector(gen, rho0):
    if isinstance(rho0, ReducedState):
        if gen.basis != REDUCED_BASIS:
            rho0 = rho0.density_matrix()
        else:
            return rho0.as_vector()
    rho0 = np.asarray(getattr(rho0, "rho", rho0))
    if gen.basis == REDUCED_BASIS:
        return ReducedState.from_density_matrix(rho0).as_vector()
    d = gen.hilbert_dimension
    if rho0.shape != (d, d):
        raise ValueError(f"initial state shape {rho0.shape} does not match generator dimension {d}")
    return rho0.astype(complex).reshape(-1)


def _propagate(gen, v0, times):
    try:
        return propagate_spectral(gen.matrix, v0, times)
    except NumericalError:
        # 고유값 분해 실패 시 강성(stiff) 적분기로 대신 전파
        return propagate_stepwise(gen.matrix, v0, times, method="BDF")


def evolve(gen, rho0, times):
    """
    ρ(t) 계산. 축약 생성자면 (p, σᴿ, σᴵ) 로부터 3x3 행렬을 재구성한다
    (바닥-여기 coherence 는 축약 좌표에 들어있지 않으므로 0).
    """
    v0 = _initial_vector(gen, rho0)
    result = _propagate(gen, v0, times)
    if gen.basis == REDUCED_BASIS:
        v = np.real(result.states)
        states = reduced_to_density_matrix(v[:, 0], v[:, 1], v[:, 2])
    else:
        d = gen.hilbert_dimension
        states = result.states.reshape(len(result.times), d, d)

    hermitian_part = 0.5 * (states + np.conj(np.swapaxes(states, 1, 2)))
    min_eigs = np.linalg.eigvalsh(hermitian_part)[:, 0]
    trace_errors = np.abs(np.trace(states, axis1=1, axis2=2) - 1.0)
    herm_errors = np.max(np.abs(states - np.conj(np.swapaxes(states, 1, 2))), axis=(1, 2))
    return Trajectory(
        times=result.times,
        states=states,
        method=result.method,
        condition=result.condition,
        min_eigs=min_eigs,
        trace_errors=trace_errors,
        hermiticity_errors=herm_errors,
    )


def evolve_reduced(gen, init, times):
    """축약 생성자로 (p, σᴿ, σᴵ) 배열 (T, 3) 을 직접 계산."""
    if gen.basis != REDUCED_BASIS:
        raise ValueError("evolve_reduced needs the reduced V-model generator")
    result = _propagate(gen, _initial_vector(gen, init), times)
    return np.real(result.states)[:, :3]


# --- 시간 척도 ---
@dataclass(frozen=True, eq=False)
class TimescaleReport:
    eigenvalues: np.ndarray          # 활성 비정상 모드, |Re λ| 오름차순
    timescales: tuple                # 서로 다른 1/|Re λ|, 내림차순
    tau1: float
    tau2: float
    tau3: float
    separation_ratio: float
    prethermal_window: tuple         # (τ₂, τ₁)
    window_open: bool                # gap_ratio > threshold
    plateau_window: tuple            # 가장 큰 gap 의 (빠른 쪽, 느린 쪽) 시간 척도
    gap_ratio: float
    non_relaxing_modes: int = 0
    filtered_modes: int = 0
    ill_conditioned: bool = False
    notes: list = field(default_factory=list)

    @property
    def plateau_time(self):
        """plateau 구간의 기하 평균 시간."""
        fast, slow = self.plateau_window
        if math.isinf(fast):
            return math.inf
        if math.isinf(slow):
            return 100.0 * fast
        return math.sqrt(fast * slow)


def _distinct_rates(rates, rel_tol=1e-8):
    distinct = []
    for rate in sorted(rates):
        if distinct and abs(rate - distinct[-1]) <= rel_tol * max(rate, distinct[-1]):
            continue
        distinct.append(rate)
    return distinct


def analyze_timescales(gen, initial=None, threshold=100.0, zero_tol=1e-12, overlap_tol=1e-10):
    """
    생성자 스펙트럼에서 τ₁ ≥ τ₂ ≥ τ₃ 와 prethermal 구간을 구한다.

    initial 을 주면 초기 상태와 겹침이 overlap_tol 미만인 모드는 제외한다.
    정상 모드(λ≈0)가 하나를 넘으면 non_relaxing_modes 로 보고하고 τ₁ = ∞.
    창은 인접 시간 척도 사이 가장 큰 gap 으로 판정한다. 느린 모드 여러 개가
    가까이 모여 있으면 (N ≥ 3) τ₁/τ₂ 가 1 에 가까워도 창은 열려 있다.
    """
    system = general_eig(gen.matrix)
    w = system.eigenvalues
    scale = max(float(np.max(np.abs(gen.matrix))), 1e-300)
    active = np.ones(len(w), dtype=bool)
    notes = []

    if initial is not None:
        if system.ill_conditioned:
            notes.append("eigenvectors ill-conditioned; initial-state filtering skipped")
        else:
            v0 = _initial_vector(gen, initial)
            amplitudes = np.abs(system.left_inverse @ v0) * np.linalg.norm(system.right, axis=0)
            active = amplitudes >= overlap_tol * max(np.linalg.norm(v0), 1e-300)

    zero = np.abs(w) < zero_tol * scale
    non_relaxing = max(int(np.sum(zero & active)) - 1, 0)
    decaying = active & ~zero
    modes = w[decaying]
    modes = modes[np.argsort(np.abs(modes.real), kind="stable")]
    rates = _distinct_rates([abs(lam.real) for lam in modes if lam.real != 0])
    taus = [1.0 / rate for rate in rates]
    if non_relaxing:
        taus.insert(0, math.inf)
        notes.append(f"{non_relaxing} non-relaxing mode(s) besides the stationary state")

    # 모드가 3개 미만이면 마지막 시간 척도를 반복 (모드가 없으면 ∞)
    padded = list(taus) or [math.inf]
    while len(padded) < 3:
        padded.append(padded[-1])
    tau1, tau2, tau3 = padded[:3]
    separation = tau1 / tau2 if tau2 > 0 and not (math.isinf(tau1) and math.isinf(tau2)) else 1.0

    if len(taus) >= 2:
        ratios = [
            math.inf if math.isinf(taus[i]) else taus[i] / taus[i + 1]
            for i in range(len(taus) - 1)
        ]
        gap = int(np.argmax(ratios))
        plateau_window = (taus[gap + 1], taus[gap])
        gap_ratio = ratios[gap]
    else:
        plateau_window = (tau1, tau1)
        gap_ratio = 1.0

    return TimescaleReport(
        eigenvalues=modes,
        timescales=tuple(taus),
        tau1=tau1,
        tau2=tau2,
        tau3=tau3,
        separation_ratio=separation,
        prethermal_window=(tau2, tau1),
        window_open=bool(gap_ratio > threshold),
        plateau_window=plateau_window,
        gap_ratio=gap_ratio,
        non_relaxing_modes=non_relaxing,
        filtered_modes=int(np.sum(~active)),
        ill_conditioned=system.ill_conditioned,
        notes=notes,
    )
