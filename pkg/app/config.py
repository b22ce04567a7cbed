from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class Settings(BaseSettings):
    # alpha-beta cost model; scales modeled time only
    ALPHA: float = 1.0
    BETA: float = 1.0
    BYTE_GRANULARITY: bool = False

    # experiment defaults (desk scale)
    PES: int = 4
    ELEMENTS: int = 50_000
    TRIALS: int = 20_000
    SEED: int = 42
    HASH: str = "crc"
    N_JOBS: int = 1
    POWER_LAW_KEYS: int = 1_000_000
    UNIFORM_HIGH: int = 10**8 - 1
    VALUE_MAX: int = 1000

    OUTPUT_FORMAT: str = "csv"
    LOG_LEVEL: str = "INFO"

    model_config = SettingsConfigDict(
        env_prefix="CHECKERS_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )


settings = Settings()
