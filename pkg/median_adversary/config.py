from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Application Settings
    app_name: str = "median-adversary"
    app_version: str = "0.1.0"

    # Sweep execution
    workers: Optional[int] = None  # MEDIAN_ADVERSARY_WORKERS beats --workers
    default_workers: int = 1

    # Size envelopes
    full_validate_max_n: int = 300
    dense_max_n: int = 3000
    cost_opt_max_n: int = 2000

    # Construction variant
    heavy_padding: bool = False

    # Logging
    log_level: str = "INFO"
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    model_config = SettingsConfigDict(
        env_prefix="MEDIAN_ADVERSARY_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
    )

    def resolve_workers(self, flag_value: Optional[int]) -> int:
        """Worker limit: environment first, then the CLI flag, then the default"""
        if self.workers is not None:
            return max(1, self.workers)
        if flag_value is not None:
            return max(1, flag_value)
        return self.default_workers


# Create a singleton instance
settings = Settings()
