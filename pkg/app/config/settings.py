# app/config/settings.py
"""
Application settings and configuration.
"""
import logging
from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict

BASE_PATH = Path(__file__).parent.parent.parent


class Settings(BaseSettings):
    """Process-wide settings read from the environment and ``.env``."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False
    )

    # Logging
    log_level: str = "INFO"

    # Files
    output_dir: str | None = None
    presets_dir: str = "configs"
    field_cache_dir: str = ".field-cache"

    # API Configuration
    api_host: str = "0.0.0.0"
    api_port: int = 8000
    api_title: str = "Geodesic Trajectory Planner API"
    api_version: str = "1.0.0"

    @property
    def presets_path(self) -> Path:
        """
        Absolute path of the preset directory.

        :return: Directory holding the experiment presets
        :rtype: Path
        """
        path = Path(self.presets_dir)
        return path if path.is_absolute() else BASE_PATH / path

    @property
    def field_cache_path(self) -> Path:
        path = Path(self.field_cache_dir)
        return path if path.is_absolute() else BASE_PATH / path


# Create global settings instance
settings = Settings()


def configure_logging(level: str | None = None) -> None:
    """
    Configure root logging once for CLI and API entry points.

    :param level: Level name (defaults to ``settings.log_level``)
    :type level: str | None
    """
    logging.basicConfig(
        level=(level or settings.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
        force=True,
    )
