from pydantic_settings import BaseSettings, SettingsConfigDict


class RabiChaosSettings(BaseSettings):
    log_dir: str = "logs"
    log_level: str = "DEBUG"
    workers: int = 1

    model_config = SettingsConfigDict(
        env_file=".env", env_file_encoding="utf-8", env_prefix="RABICHAOS_"
    )


rabichaos_settings = RabiChaosSettings()
