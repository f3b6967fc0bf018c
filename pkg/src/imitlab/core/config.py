from pathlib import Path

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# Resolve .env from project root (3 levels up from this file)
_ENV_FILE = Path(__file__).resolve().parent.parent.parent.parent / ".env"


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=_ENV_FILE,
        env_prefix="LAB_",
        extra="ignore",
    )

    # Campaign execution
    threads: int = 1
    log_level: str = "INFO"

    # Bound verdicts: slack tolerance covers linear-solver noise only
    verdict_tolerance: float = 1e-9

    # Embedded simplex
    lp_tolerance: float = 1e-9
    lp_max_iterations: int = 50_000

    @field_validator("threads", "lp_max_iterations")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"must be >= 1, got {value}")
        return value


settings = Settings()
