"""Runtime configuration overrides for the planning API.

Defaults come from the project .env file and the Settings field defaults; overrides applied
through the API live in memory for the lifetime of the process.
"""

from typing import Any, Dict, Optional

from pydantic import ValidationError

from trajplan.config import Settings


class ConfigManager:
    """Holds the default Settings plus any overrides applied at runtime."""

    def __init__(self):
        self._default_config: Optional[Settings] = None
        self._overrides: Dict[str, Any] = {}

    def load_default_config(self) -> Settings:
        """(Re)load Settings from .env and defaults, then re-apply stored overrides."""
        base = Settings()
        if self._overrides:
            base = Settings(**{**base.model_dump(), **self._overrides})
        self._default_config = base
        return self._default_config

    def get_default_config(self) -> Settings:
        if self._default_config is None:
            return self.load_default_config()
        return self._default_config

    def get_config_with_overrides(self, overrides: Dict[str, Any]) -> Settings:
        """Settings with ``overrides`` merged on top of the current configuration.

        Raises:
            ValidationError: If overrides contain invalid values
        """
        base_config = self.get_default_config().model_dump()
        base_config.update(overrides)
        return Settings(**base_config)

    def get_config_dict(self) -> Dict[str, Any]:
        return self.get_default_config().model_dump()

    @property
    def overrides(self) -> Dict[str, Any]:
        return dict(self._overrides)

    def validate_overrides(self, overrides: Dict[str, Any]) -> Dict[str, str]:
        """Map of field → message for invalid overrides (empty if valid)."""
        try:
            self.get_config_with_overrides(overrides)
            return {}
        except ValidationError as e:
            errors = {}
            for error in e.errors():
                field = ".".join(str(x) for x in error["loc"])
                errors[field] = error["msg"]
            return errors

    def apply_overrides(self, overrides: Dict[str, Any]) -> Settings:
        """Validate and keep ``overrides`` for every later request.

        Raises:
            ValidationError: If overrides contain invalid values
        """
        self._default_config = self.get_config_with_overrides(overrides)
        self._overrides.update(overrides)
        return self._default_config

    def reset(self) -> Settings:
        self._overrides = {}
        return self.load_default_config()
