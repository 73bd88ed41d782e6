from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    ENV: str = "development"
    APP_NAME: str = "lw-lab"

    LOG_LEVEL: str = "WARNING"
    LOG_FILE: str | None = None

    LW_LAB_THREADS: int = 4

    TOLERANCE: float = 1e-9
    DEFAULT_BID_GRID: float = 0.05

    OPT_MAX_SHARES: int = 16
    XOS_EXACT_SHARES: int = 12
    MAX_DEVIATION_ROWS: int = 10_000_000
    MAX_JOINT_SUPPORT: int = 1_000_000
    MAX_MIXED_N: int = 8

    DEFAULT_ALPHA: float = 2.26
    DEFAULT_GAMMA: float = 7.16

    BRD_MAX_ROUNDS: int = 1000
    SIMPLEX_MAX_PIVOTS: int = 10_000

    @property
    def is_production(self) -> bool:
        return self.ENV.lower() in ("production", "prod")

    @property
    def is_development(self) -> bool:
        return self.ENV.lower() in ("development", "dev")

    @property
    def thread_count(self) -> int:
        return max(1, self.LW_LAB_THREADS)

    def validate_settings(self) -> None:
        errors = []

        if self.LW_LAB_THREADS < 1:
            errors.append("LW_LAB_THREADS must be at least 1")
        if not 0 < self.TOLERANCE < 1e-3:
            errors.append("TOLERANCE must lie in (0, 1e-3)")
        if self.DEFAULT_BID_GRID <= 0:
            errors.append("DEFAULT_BID_GRID must be positive")
        if self.OPT_MAX_SHARES < 1:
            errors.append("OPT_MAX_SHARES must be positive")
        if self.MAX_DEVIATION_ROWS < 1 or self.MAX_JOINT_SUPPORT < 1:
            errors.append("MAX_DEVIATION_ROWS and MAX_JOINT_SUPPORT must be positive")
        if self.DEFAULT_ALPHA <= 1 or self.DEFAULT_GAMMA <= 1:
            errors.append("DEFAULT_ALPHA and DEFAULT_GAMMA must exceed 1")
        if self.BRD_MAX_ROUNDS < 1:
            errors.append("BRD_MAX_ROUNDS must be positive")

        if errors:
            raise ValueError("Configuration errors:\n" + "\n".join(f"  - {e}" for e in errors))


settings = Settings()
settings.validate_settings()
