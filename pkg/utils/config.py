from typing import List, Optional

from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict


class Settings(BaseSettings):
    """Configuration for the irvo toolchain; built from CLI flags only"""

    # Logging
    log_level: str = "WARNING"
    log_dir: Optional[str] = None

    # Checking
    output_format: str = "text"
    severity_threshold: str = "Info"
    max_workers: int = 4

    # Classification
    device_profiles: List[str] = ["mouse", "keyboard", "screen"]

    # Rendering
    show_dashed: bool = True
    show_transducers: bool = True
    cluster_places: bool = True

    # Parsed-model cache
    cache_entries: int = 128

    model_config = SettingsConfigDict(extra="ignore")

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls,
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ):
        # flags only; environment and .env are ignored
        return (init_settings,)
