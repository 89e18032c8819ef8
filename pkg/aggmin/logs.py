from datetime import datetime, timezone
from pythonjsonlogger import json

from aggmin.settings import get_settings

class JsonFormatter(json.JsonFormatter):

    def add_fields(self, log_data, record, message_dict):
        super().add_fields(log_data, record, message_dict)
        if not log_data.get('timestamp'):
            now = datetime.now(timezone.utc).strftime('%Y-%m-%dT%H:%M:%S.%fZ')
            log_data['timestamp'] = now
        if log_data.get('level'):
            log_data['level'] = log_data['level'].upper()
        else:
            log_data['level'] = record.levelname
        log_data['logger'] = record.name

def get_log_config(level: str | None = None) -> dict:
    settings = get_settings()
    level = level or settings.LOG_LEVEL

    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "json": {
                "class": "aggmin.logs.JsonFormatter"
            }
        },
        "handlers": {
            "stderr": {
                "formatter": "json",
                "class": "logging.StreamHandler",
                "stream": "ext://sys.stderr",
                "level": level,
            }
        },
        "loggers": {
            "aggmin": {
                "level": level,
                "propagate": True
            },
            # font manager noise
            "matplotlib": {
                "level": "WARNING",
                "propagate": True
            },
        },
        "root": {
            "handlers": ["stderr"],
            "level": level,
        },
    }
