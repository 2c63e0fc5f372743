from __future__ import annotations


class SimError(RuntimeError):
    exit_code = 2

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


class ConfigError(SimError):
    exit_code = 1


class NumericalError(SimError):
    exit_code = 2


class UnknownDistribution(ConfigError):
    def __init__(self, name: str) -> None:
        super().__init__("unknown_distribution", f"Unknown degree distribution {name!r}.")


class InsufficientAreaSamples(NumericalError):
    def __init__(self, have: int, need: int) -> None:
        super().__init__(
            "insufficient_k_max",
            f"Area samples cover k <= {have}, but the truncated sum needs k <= {need}.",
        )
