from __future__ import annotations

from pathlib import Path

import pytest

from wpslab.mac import Oui
from wpslab.protocol import ClientConfig, WpsClient
from wpslab.sim import ClusterSpec, LocalTransport, WorldConfig, generate_world

DATA_DIR = Path(__file__).parent / "data"

FULL_REGISTRY_SIZE = 34322


@pytest.fixture
def sample_registry_path() -> Path:
    return DATA_DIR / "oui_sample.txt"


@pytest.fixture
def alias_csv_path() -> Path:
    return DATA_DIR / "vendor_aliases.csv"


@pytest.fixture(scope="session")
def full_registry_path(tmp_path_factory) -> Path:
    """Synthetic full-size registry: 34,322 distinct universal unicast prefixes.

    Real-world snapshots drift in size, so count assertions run against this
    bundled fixture only.
    """
    path = tmp_path_factory.mktemp("registry") / "oui_full.txt"
    lines = [
        "Registry fixture (synthetic)",
        "",
    ]
    made = 0
    i = 0
    while made < FULL_REGISTRY_SIZE:
        value = (i * 48619 + 7) % (1 << 24)
        i += 1
        if (value >> 16) & 0x03:
            continue  # keep U/L and multicast bits unset
        text = f"{value:06X}"
        lines.append(f"{text[0:2]}-{text[2:4]}-{text[4:6]}   (hex)\t\tVendor {made:05d}")
        made += 1
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def make_cluster_world(
    count: int = 50,
    seed: int = 7,
    center=(40.0, -75.0),
    stddev_km: float = 1.0,
    oui: str = "74:24:9f",
    **config_kwargs,
):
    cfg = WorldConfig(
        seed=seed,
        clusters=(ClusterSpec(center[0], center[1], stddev_km, count),),
        vendor_mix=((Oui.parse(oui), 1.0),),
        **config_kwargs,
    )
    return generate_world(cfg)


def local_client(world, rate: float = 10_000.0, batch_size: int = 100, in_flight: int = 1,
                 client_key: str = "test", **kwargs) -> WpsClient:
    cfg = ClientConfig(rate_per_s=rate, batch_size=batch_size, in_flight=in_flight, **kwargs)
    return WpsClient(cfg, transport=LocalTransport(world, client_key=client_key))


@pytest.fixture
def cluster_world():
    return make_cluster_world()
