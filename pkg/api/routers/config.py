"""Configuration management endpoints."""

from typing import Any, Dict

from fastapi import APIRouter, HTTPException, Request
from pydantic import BaseModel, ValidationError

from trajplan.config import Settings

router = APIRouter()


class ConfigUpdateRequest(BaseModel):
    """Request model for config updates."""

    overrides: Dict[str, Any]


class ConfigResponse(BaseModel):
    """Response model for config data."""

    config: Dict[str, Any]
    overrides: Dict[str, Any] = {}
    source: str = "default"


def _errors(e: ValidationError) -> Dict[str, str]:
    return {".".join(str(x) for x in err["loc"]): err["msg"] for err in e.errors()}


@router.get("", response_model=ConfigResponse)
async def get_config(request: Request):
    """Current configuration: .env and Field defaults plus runtime overrides."""
    config_manager = request.app.state.config_manager
    return ConfigResponse(
        config=config_manager.get_config_dict(),
        overrides=config_manager.overrides,
        source=".env + defaults + overrides",
    )


@router.post("/validate")
async def validate_config(request: Request, config_update: ConfigUpdateRequest):
    """Validate configuration overrides without applying them."""
    config_manager = request.app.state.config_manager
    errors = config_manager.validate_overrides(config_update.overrides)
    return {"valid": not errors, "errors": errors}


@router.post("", response_model=ConfigResponse)
async def apply_config(request: Request, config_update: ConfigUpdateRequest):
    """Apply overrides for all later requests of this process."""
    config_manager = request.app.state.config_manager
    try:
        config_manager.apply_overrides(config_update.overrides)
    except ValidationError as e:
        raise HTTPException(
            status_code=400, detail={"message": "Validation failed", "errors": _errors(e)}
        )
    return ConfigResponse(
        config=config_manager.get_config_dict(),
        overrides=config_manager.overrides,
        source=".env + defaults + overrides",
    )


@router.post("/reset", response_model=ConfigResponse)
async def reset_config(request: Request):
    """Drop runtime overrides and reload from .env."""
    config_manager = request.app.state.config_manager
    config_manager.reset()
    return ConfigResponse(config=config_manager.get_config_dict(), source=".env + defaults")


@router.get("/schema")
async def get_config_schema():
    """Field names, types, defaults and descriptions of the Settings model."""
    schema = Settings.model_json_schema()

    fields = {}
    for field_name, field_info in schema.get("properties", {}).items():
        fields[field_name] = {
            "type": field_info.get("type"),
            "default": field_info.get("default"),
            "description": field_info.get("description", ""),
            "title": field_info.get("title", field_name),
        }

    return {"fields": fields, "required": schema.get("required", [])}
