"""CLI 종료 코드와 1:1 로 대응하는 예외 클래스."""


class ConfigError(ValueError):
    """설정 파일/플래그 검증 실패 (exit 2). 메시지에 모든 위반 사항을 담는다."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class NumericalError(RuntimeError):
    """고유값 분해 실패 등 수치 계산 오류 (exit 3)."""


class InvariantViolation(RuntimeError):
    """출력 검증(물리적 불변식) 위반 (exit 4)."""
