"""
선형대수 / 선형 ODE 전파 도구.

모든 고유값 분해는 scipy.linalg (LAPACK Hessenberg + shifted QR) 를 사용하고,
결과에는 잔차(residual) 와 조건수(condition) 를 함께 기록한다.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from .errors import NumericalError

# --- 기본 허용 오차 ---
DEFAULT_TOLERANCES = {
    "hermitian": 1e-12,   # ‖A − A†‖ / ‖A‖
    "residual": 1e-9,     # ‖A V − V Λ‖ / ‖A‖
    "condition": 1e12,    # 이 이상이면 expm 으로 fallback
}
MAX_DIMENSION = 1024
STEPWISE_METHODS = ("DOP853", "BDF")
_TINY = 1e-300


def _max_abs(a):
    return float(np.max(np.abs(a))) if a.size else 0.0


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """A = V · diag(λ) · V⁻¹ 분해 결과."""

    eigenvalues: np.ndarray
    right: np.ndarray
    left_inverse: Optional[np.ndarray]
    residual: float
    condition: float
    ill_conditioned: bool = False

    @property
    def dimension(self):
        return len(self.eigenvalues)


def _check_square(a, name="matrix"):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if a.shape[0] > MAX_DIMENSION:
        raise ValueError(f"{name} dimension {a.shape[0]} exceeds the cap of {MAX_DIMENSION}")
    if not np.all(np.isfinite(a)):
        raise NumericalError(f"{name} contains non-finite entries")
    return a


def hermiticity_error(a):
    """‖A − A†‖_max (절대값)."""
    a = np.asarray(a)
    return _max_abs(a - a.conj().T)


def hermitian_eig(a, tol=None):
    """
    Hermitian 행렬의 고유값 분해.

    Args:
        a: (n, n) Hermitian 행렬
        tol: 상대 Hermitian 허용 오차 (기본 1e-12)

    Returns:
        EigenSystem (고유값 오름차순, 고유벡터 정규직교)
    """
    tol = DEFAULT_TOLERANCES["hermitian"] if tol is None else tol
    a = _check_square(a)
    scale = max(_max_abs(a), _TINY)
    defect = hermiticity_error(a)
    if defect > tol * scale:
        raise ValueError(
            f"matrix is not Hermitian: ‖A − A†‖ = {defect:.3e} exceeds {tol:.1e}·‖A‖"
        )
    a = 0.5 * (a + a.conj().T)
    try:
        w, v = scipy.linalg.eigh(a)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"Hermitian eigensolver failed: {exc}") from exc
    residual = _max_abs(a @ v - v * w)
    if residual > DEFAULT_TOLERANCES["residual"] * scale:
        raise NumericalError(f"Hermitian eigen-residual {residual:.3e} too large")
    return EigenSystem(
        eigenvalues=w,
        right=v,
        left_inverse=v.conj().T,
        residual=residual,
        condition=1.0,
    )


def general_eig(a, condition_limit=None):
    """
    일반 (비정규) 행렬의 고유값 분해. 조건수가 condition_limit 를 넘으면
    ill_conditioned 로 표시하고 left_inverse 는 가능할 때만 채운다.
    """
    condition_limit = DEFAULT_TOLERANCES["condition"] if condition_limit is None else condition_limit
    a = _check_square(a)
    try:
        w, v = scipy.linalg.eig(a)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigensolver did not converge: {exc}") from exc

    scale = max(_max_abs(a), _TINY)
    residual = _max_abs(a @ v - v * w)
    if not np.isfinite(residual) or residual > DEFAULT_TOLERANCES["residual"] * scale:
        raise NumericalError(
            f"eigen-residual {residual:.3e} exceeds {DEFAULT_TOLERANCES['residual']:.0e}·‖A‖"
        )

    condition = float(np.linalg.cond(v)) if a.shape[0] else 1.0
    ill = not np.isfinite(condition) or condition > condition_limit
    left_inverse = None
    try:
        left_inverse = np.linalg.inv(v)
    except np.linalg.LinAlgError:
        ill = True
    return EigenSystem(
        eigenvalues=w,
        right=v,
        left_inverse=left_inverse,
        residual=residual,
        condition=condition,
        ill_conditioned=ill,
    )


@dataclass(frozen=True, eq=False)
class Propagation:
    """v(t) 샘플. states[i] 가 times[i] 에 대응."""

    times: np.ndarray
    states: np.ndarray
    method: str          # "spectral" | "expm" | "stepwise"
    condition: float = 1.0


def _as_times(times):
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0) or not np.all(np.isfinite(times)):
        raise ValueError("times must be finite and non-negative")
    return times


def propagate_spectral(g, v0, times, system=None):
    """
    dv/dt = G v 의 해 v(t) = V e^{Λt} V⁻¹ v0.

    조건수가 나쁘면 scipy.linalg.expm(G t) 로 시간별로 직접 계산한다.
    t = 0 에서는 v0 를 그대로 돌려준다.
    """
    g = _check_square(g, "generator")
    v0 = np.asarray(v0)
    if v0.shape != (g.shape[0],):
        raise ValueError(f"initial vector shape {v0.shape} does not match generator {g.shape}")
    times = _as_times(times)
    real_problem = np.isrealobj(g) and np.isrealobj(v0)

    system = general_eig(g) if system is None else system
    if system.ill_conditioned or system.left_inverse is None:
        states = np.array([scipy.linalg.expm(g * t) @ v0 for t in times])
        method = "expm"
    else:
        coeffs = system.left_inverse @ v0
        with np.errstate(under="ignore", over="ignore"):
            phases = np.exp(np.outer(times, system.eigenvalues))
        states = (phases * coeffs) @ system.right.T
        method = "spectral"

    states = np.asarray(states, dtype=complex)
    states[times == 0] = v0
    if real_problem:
        states = states.real
    return Propagation(times=times, states=states, method=method, condition=system.condition)


def propagate_stepwise(g, v0, times, max_step=np.inf, rtol=1e-10, atol=1e-13, method="DOP853"):
    """
    solve_ivp 로 단계별 전파. 기본 DOP853 은 교차 검증용이고 스펙트럴 경로와
    코드를 공유하지 않는다. 고유값 분해가 실패하면 호출자가 method="BDF" 로 쓴다.
    """
    if method not in STEPWISE_METHODS:
        raise ValueError(f"stepwise method must be one of {list(STEPWISE_METHODS)}, got {method!r}")
    g = _check_square(g, "generator")
    times = _as_times(times)
    v0 = np.asarray(v0, dtype=complex)
    order = np.argsort(times)
    t_sorted = times[order]
    if not len(times) or t_sorted[-1] == 0:
        states = np.tile(v0, (len(times), 1))
        return Propagation(times=times, states=states.real if np.isrealobj(g) else states,
                           method="stepwise")

    sol = solve_ivp(
        lambda _t, v: g @ v,
        (0.0, float(t_sorted[-1])),
        v0,
        method=method,
        t_eval=t_sorted,
        rtol=rtol,
        atol=atol,
        max_step=max_step,
        **({"jac": g} if method == "BDF" else {}),
    )
    if not sol.success:
        raise NumericalError(f"stepwise integration failed: {sol.message}")
    states = np.empty((len(times), len(v0)), dtype=complex)
    states[order] = sol.y.T
    if np.isrealobj(g):
        states = states.real
    return Propagation(times=times, states=states, method="stepwise")
