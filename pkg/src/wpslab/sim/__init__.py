"""Simulated Wi-Fi positioning service over a synthetic ground-truth world."""

from .service import LocalTransport, SimServer, handle_locate
from .world import (
    AliasState,
    ChurnSpec,
    ClusterSpec,
    MitigationSpec,
    MoverSpec,
    RateLimited,
    SimAp,
    WorldConfig,
    WorldModel,
    WorldView,
    advance_day,
    config_from_dict,
    config_to_dict,
    generate_world,
    load_world,
    save_world,
    serve,
    world_from_dict,
    world_to_dict,
)

__all__ = [
    "AliasState",
    "ChurnSpec",
    "ClusterSpec",
    "LocalTransport",
    "MitigationSpec",
    "MoverSpec",
    "RateLimited",
    "SimAp",
    "SimServer",
    "WorldConfig",
    "WorldModel",
    "WorldView",
    "advance_day",
    "config_from_dict",
    "config_to_dict",
    "generate_world",
    "handle_locate",
    "load_world",
    "save_world",
    "serve",
    "world_from_dict",
    "world_to_dict",
]
