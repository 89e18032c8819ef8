from __future__ import annotations
from typing import Optional
from pydantic_settings import BaseSettings, SettingsConfigDict

_settings: Optional[Settings] = None

def get_settings() -> Settings:
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings

class Settings(BaseSettings):
    LOG_LEVEL: str = 'INFO'
    JOBS: int = 1
    CACHE_DIR: str = ''
    OUT_DIR: str = 'out'

    model_config = SettingsConfigDict(env_file='.env', env_prefix='AGGMIN_', extra='ignore')
