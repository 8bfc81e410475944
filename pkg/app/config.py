from pydantic_settings import BaseSettings
from pathlib import Path


class Settings(BaseSettings):
    # Application
    APP_NAME: str = "SC Adversarial Defense"
    APP_VERSION: str = "1.0.0"
    DEBUG: bool = False

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FILE: Path = Path("./logs/scdefense.log")

    # Data (directory holding the four MNIST IDX files, optionally gzipped)
    DATA_DIR: Path = Path("./data/mnist")

    # Artifacts
    ARTIFACTS_PATH: Path = Path("./storage/artifacts")
    WEIGHTS_FILE: str = "lenet5.scnn"
    ADVERSARIAL_FILE: str = "adversarial.scae"
    REPORT_CSV: str = "report.csv"
    REPORT_JSON: str = "report.json"

    # Experiments
    DEFAULT_SEED: int = 1234
    ATTACK_BATCH_SIZE: int = 50
    RECORD_WALL_TIME: bool = False

    class Config:
        env_file = ".env"
        case_sensitive = True

    @property
    def weights_path(self) -> Path:
        return self.ARTIFACTS_PATH / self.WEIGHTS_FILE

    @property
    def adversarial_path(self) -> Path:
        return self.ARTIFACTS_PATH / self.ADVERSARIAL_FILE


settings = Settings()

# Ensure directories exist
settings.ARTIFACTS_PATH.mkdir(parents=True, exist_ok=True)
