"""wpslab: a desk-scale lab for studying Wi-Fi positioning service abuse.

Address-space seeding and guess generation (`mac`), geodesy and regions
(`geo`), the wire protocol and batching client (`protocol`), a faithful
local service simulator (`sim`), the sweep/region crawler (`crawl`),
longitudinal analyses (`track`), and vendor/bin reporting (`report`).
"""

from . import crawl, geo, mac, protocol, report, sim, track
from .geo import GeoPosition, NOT_FOUND, haversine_km, geohash
from .mac import MacAddress, Oui, build_seed_set, load_oui_registry, random_bssids
from .protocol import ClientConfig, LocateRequest, LocateResponse, WpsClient, WpsRecord

__version__ = "0.1.0"

__all__ = [
    "ClientConfig",
    "GeoPosition",
    "LocateRequest",
    "LocateResponse",
    "MacAddress",
    "NOT_FOUND",
    "Oui",
    "WpsClient",
    "WpsRecord",
    "build_seed_set",
    "crawl",
    "geo",
    "geohash",
    "haversine_km",
    "load_oui_registry",
    "mac",
    "protocol",
    "random_bssids",
    "report",
    "sim",
    "track",
]
