"""MAC address, OUI, and vendor-registry primitives for BSSID-space enumeration.

Wi-Fi access points are identified by 48-bit BSSIDs whose high 24 bits are a
vendor prefix (OUI). Two flag bits in the first octet matter here: the
multicast bit (lowest order) and the universal/local bit (second lowest).
Registered vendor prefixes always have both unset, which is what makes the
allocated address space small enough to enumerate by guessing.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

MULTICAST_BIT = 0x01
LOCAL_BIT = 0x02

SUFFIX_BITS = 24
SUFFIX_SPACE = 1 << SUFFIX_BITS

_HEX = frozenset("0123456789abcdefABCDEF")


class MacParseError(ValueError):
    """A MAC or OUI string could not be parsed."""


class RegistryError(ValueError):
    """A vendor registry file was unusable."""


def _parse_hex_groups(text: str, n_octets: int) -> int:
    """Parse `n_octets` hex pairs, separated by ':' or '-' or nothing."""
    s = text.strip()
    seps = {c for c in s if c in ":-"}
    if len(seps) > 1:
        raise MacParseError(f"mixed separators in {text!r}")
    if seps:
        sep = seps.pop()
        parts = s.split(sep)
        if len(parts) != n_octets:
            raise MacParseError(
                f"expected {n_octets} octets in {text!r}, got {len(parts)}"
            )
        for i, part in enumerate(parts):
            if len(part) != 2 or any(c not in _HEX for c in part):
                raise MacParseError(f"bad octet {part!r} at position {i} in {text!r}")
        s = "".join(parts)
    else:
        if len(s) != 2 * n_octets:
            raise MacParseError(
                f"expected {2 * n_octets} hex digits in {text!r}, got {len(s)}"
            )
        for i, c in enumerate(s):
            if c not in _HEX:
                raise MacParseError(f"non-hex character {c!r} at position {i} in {text!r}")
    return int(s, 16)


@dataclass(frozen=True, order=True)
class MacAddress:
    """48-bit link-layer identifier."""

    value: int

    def __post_init__(self):
        if not 0 <= self.value < 1 << 48:
            raise ValueError(f"MAC value out of range: {self.value:#x}")

    @classmethod
    def parse(cls, text: str) -> MacAddress:
        return cls(_parse_hex_groups(text, 6))

    @classmethod
    def from_octets(cls, octets: bytes) -> MacAddress:
        if len(octets) != 6:
            raise ValueError(f"expected 6 octets, got {len(octets)}")
        return cls(int.from_bytes(octets, "big"))

    @property
    def octets(self) -> bytes:
        return self.value.to_bytes(6, "big")

    @property
    def is_multicast(self) -> bool:
        return bool((self.value >> 40) & MULTICAST_BIT)

    @property
    def is_locally_administered(self) -> bool:
        return bool((self.value >> 40) & LOCAL_BIT)

    @property
    def oui(self) -> Oui:
        return Oui(self.value >> SUFFIX_BITS)

    @property
    def suffix(self) -> int:
        return self.value & (SUFFIX_SPACE - 1)

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.octets)

    def __repr__(self) -> str:
        return f"MacAddress({str(self)!r})"


@dataclass(frozen=True, order=True)
class Oui:
    """24-bit vendor prefix (high 3 bytes of a MAC address)."""

    value: int

    def __post_init__(self):
        if not 0 <= self.value < 1 << 24:
            raise ValueError(f"OUI value out of range: {self.value:#x}")

    @classmethod
    def parse(cls, text: str) -> Oui:
        return cls(_parse_hex_groups(text, 3))

    @classmethod
    def from_octets(cls, octets: bytes) -> Oui:
        if len(octets) != 3:
            raise ValueError(f"expected 3 octets, got {len(octets)}")
        return cls(int.from_bytes(octets, "big"))

    @property
    def octets(self) -> bytes:
        return self.value.to_bytes(3, "big")

    @property
    def is_multicast(self) -> bool:
        return bool((self.value >> 16) & MULTICAST_BIT)

    @property
    def is_locally_administered(self) -> bool:
        return bool((self.value >> 16) & LOCAL_BIT)

    def with_local_bit(self, flag: bool) -> Oui:
        """Copy of this prefix with the universal/local bit forced to `flag`."""
        if flag:
            return Oui(self.value | (LOCAL_BIT << 16))
        return Oui(self.value & ~(LOCAL_BIT << 16))

    def bssid(self, suffix: int) -> MacAddress:
        if not 0 <= suffix < SUFFIX_SPACE:
            raise ValueError(f"suffix out of range: {suffix:#x}")
        return MacAddress((self.value << SUFFIX_BITS) | suffix)

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.octets)

    def __repr__(self) -> str:
        return f"Oui({str(self)!r})"


def parse_mac(text: str) -> MacAddress:
    return MacAddress.parse(text)


def parse_oui(text: str) -> Oui:
    return Oui.parse(text)


def is_multicast(mac: MacAddress) -> bool:
    return mac.is_multicast


def is_locally_administered(mac: MacAddress) -> bool:
    return mac.is_locally_administered


def with_local_bit(oui: Oui, flag: bool) -> Oui:
    return oui.with_local_bit(flag)


def normalized_oui(mac: MacAddress) -> Oui:
    """Vendor-lookup key: the high 3 bytes with the universal/local bit cleared."""
    return mac.oui.with_local_bit(False)


# IEEE registry file line, e.g. "74-24-9F   (hex)\t\tTIBRO Corp."
_IEEE_LINE = re.compile(
    r"^\s*([0-9A-Fa-f]{2})-([0-9A-Fa-f]{2})-([0-9A-Fa-f]{2})\s+\(hex\)\s+(.+?)\s*$"
)


@dataclass
class OuiRegistry:
    """Vendor prefix table with optional vendor-name normalization aliases."""

    entries: dict[Oui, str] = field(default_factory=dict)
    aliases: dict[str, str] = field(default_factory=dict)
    duplicate_lines: int = 0
    skipped_lines: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    def vendor_of(self, mac: MacAddress) -> str | None:
        """Vendor name for a MAC via its normalized OUI; None when unregistered."""
        name = self.entries.get(normalized_oui(mac))
        if name is None:
            return None
        return self.aliases.get(name, name)

    def add(self, oui: Oui, vendor: str) -> bool:
        """Insert one entry; first entry for a prefix wins. Returns False on duplicate."""
        if oui.is_locally_administered or oui.is_multicast:
            raise ValueError(f"registry prefixes must have U/L and multicast bits unset: {oui}")
        if oui in self.entries:
            self.duplicate_lines += 1
            return False
        self.entries[oui] = vendor
        return True


def load_alias_table(path: str | Path) -> dict[str, str]:
    """Load a `raw_name,normalized_name` CSV (header optional)."""
    table: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or len(row) < 2:
                continue
            raw, norm = row[0].strip(), row[1].strip()
            if raw.lower() == "raw_name" and norm.lower() == "normalized_name":
                continue
            if raw:
                table[raw] = norm
    return table


def load_oui_registry(path: str | Path, alias_path: str | Path | None = None) -> OuiRegistry:
    """Load a vendor registry from an IEEE-layout text file or an `oui,vendor` CSV.

    Lines that do not parse are skipped and counted; duplicate prefixes keep
    the first occurrence. A file yielding zero entries is a hard error.
    """
    text = Path(path).read_text(encoding="utf-8", errors="replace")
    registry = OuiRegistry()
    ieee_layout = "(hex)" in text

    if ieee_layout:
        for line in text.splitlines():
            m = _IEEE_LINE.match(line)
            if m is None:
                continue
            try:
                oui = Oui.parse("".join(m.group(1, 2, 3)))
            except MacParseError:
                registry.skipped_lines += 1
                continue
            _registry_add(registry, oui, m.group(4))
    else:
        for row in csv.reader(text.splitlines()):
            if not row:
                continue
            if row[0].strip().lower() == "oui":
                continue
            if len(row) < 2:
                registry.skipped_lines += 1
                continue
            try:
                oui = Oui.parse(row[0].strip())
            except MacParseError:
                registry.skipped_lines += 1
                continue
            _registry_add(registry, oui, row[1].strip())

    if not registry.entries:
        raise RegistryError(f"no registry entries parsed from {path}")
    if registry.duplicate_lines or registry.skipped_lines:
        logger.warning(
            "registry %s: %d duplicate and %d unusable lines ignored",
            path, registry.duplicate_lines, registry.skipped_lines,
        )
    if alias_path is not None:
        registry.aliases = load_alias_table(alias_path)
    return registry


def _registry_add(registry: OuiRegistry, oui: Oui, vendor: str) -> None:
    if oui.is_locally_administered or oui.is_multicast:
        registry.skipped_lines += 1
        return
    registry.add(oui, vendor)


def vendor_of(registry: OuiRegistry, mac: MacAddress) -> str | None:
    return registry.vendor_of(mac)


def build_seed_set(registry: OuiRegistry) -> list[Oui]:
    """All registered prefixes plus their locally-administered variants.

    Deterministic order: prefixes ascending, each followed by its U/L=1 twin.
    """
    if not registry.entries:
        raise ValueError("cannot build a seed set from an empty registry")
    seeds: list[Oui] = []
    seen: set[Oui] = set()
    for oui in sorted(registry.entries):
        for variant in (oui.with_local_bit(False), oui.with_local_bit(True)):
            if variant not in seen:
                seen.add(variant)
                seeds.append(variant)
    return seeds


def _round_keys(oui: Oui, rng_seed: int | str) -> tuple[int, int, int, int]:
    digest = hashlib.blake2s(f"{rng_seed}:{oui}".encode()).digest()
    k = tuple(int.from_bytes(digest[i : i + 4], "big") for i in range(0, 16, 4))
    return k  # type: ignore[return-value]


def suffix_permutation(oui: Oui, n: int, rng_seed: int | str) -> np.ndarray:
    """First `n` values of a seed-keyed permutation of the 24-bit suffix space.

    A 4-round balanced Feistel network over 12+12 bits: bijective on
    [0, 2^24), so draws are distinct without replacement bookkeeping, and
    n = 2^24 enumerates every suffix exactly once.
    """
    if not 1 <= n <= SUFFIX_SPACE:
        raise ValueError(f"n must be in [1, {SUFFIX_SPACE}], got {n}")
    keys = _round_keys(oui, rng_seed)
    idx = np.arange(n, dtype=np.int64)
    left = idx >> 12
    right = idx & 0xFFF
    for k in keys:
        f = ((right * 0x9E3779B1 + k) ^ (right >> 5)) & 0xFFF
        left, right = right, left ^ f
    return (left << 12) | right


def random_bssids(oui: Oui, n: int, rng_seed: int | str) -> list[MacAddress]:
    """`n` distinct BSSIDs under `oui`, reproducible for a given seed."""
    base = oui.value << SUFFIX_BITS
    return [MacAddress(base | int(s)) for s in suffix_permutation(oui, n, rng_seed)]
