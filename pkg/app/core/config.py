from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")

    # Project Description
    PROJECT_NAME: str = "Matrix Hypercosine Toolkit"
    VERSION: str = "0.1.0"

    # Eigensolver
    EIG_TOL: float = 1e-10  # scaled by max(1, ||A||)
    EXP_OVERFLOW_LIMIT: float = 700.0

    # Greedy selector
    TIE_LOG_TOL: float = 1e-10
    GROWTH_SLACK: float = 1e-9
    FAMILY_ENUMERATION_LIMIT: float = 1e8
    FAMILY_NORM_SLACK: float = 1e-9
    FAMILY_MEAN_TOL: float = 1e-8

    # Secular equation solver
    SECULAR_TOL: float = 1e-12  # relative to max(sigma) + ||z||^2
    SECULAR_DEFLATION_TOL: float = 1e-14
    SECULAR_MAX_ITER: int = 200

    # Certification constants (initial values, doubled on failure)
    CAYLEY_C0: float = 8.0
    ISOTROPIC_C0: float = 8.0
    MAX_DOUBLINGS: int = 3

    # Cayley graphs
    GROUP_ORDER_LIMIT: int = 10_000
    ASSOCIATIVITY_SAMPLES_PER_ELEMENT: int = 10
    ESTRADA_DELTA_EXPONENT: int = 4

    # Spectral / element-wise sparsification
    RANK_TOL: float = 1e-10
    GENERIC_ELEMENTWISE_MAX_N: int = 64
    AUDIT_WORK_LIMIT: float = 1e9
    POWER_ITERATIONS: int = 100

    # Workers
    THREADS: int = 1

    # Logging
    LOG_LEVEL: str = "WARNING"
    LOG_SERIALIZE: bool = False

    @field_validator(
        "EIG_TOL",
        "TIE_LOG_TOL",
        "SECULAR_TOL",
        "SECULAR_DEFLATION_TOL",
        "RANK_TOL",
        "CAYLEY_C0",
        "ISOTROPIC_C0",
    )
    def validate_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("Tolerances and constants must be positive")
        return v

    @field_validator("THREADS", "MAX_DOUBLINGS", "SECULAR_MAX_ITER")
    def validate_count(cls, v: int) -> int:
        if v < 0:
            raise ValueError("Counts must be non-negative")
        return v


settings = Settings()
