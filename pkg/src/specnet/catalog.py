"""Survey catalog records: parsing, quality flags and good-record filtering.

The catalog is a plain whitespace-separated text table with columns
PLATE MJD FIBERID SPECBOSS ZWARNING CLASS Z, one object per line,
'#' starting a comment line.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class ObjectClass(enum.IntEnum):
    """Object type with the catalog's integer encoding."""

    GALAXY = 0
    QSO = 1
    STAR = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_code(cls, code: int) -> "ObjectClass":
        try:
            return cls(code)
        except ValueError:
            raise ValueError(f"class code {code} outside {{0,1,2}}") from None

    @classmethod
    def from_label(cls, label: str) -> "ObjectClass":
        try:
            return cls[label.upper()]
        except KeyError:
            raise ValueError(f"unknown object class {label!r}") from None


#: bit -> flag name, in bit order 0..7
ZWARNING_FLAGS = (
    "SKY",
    "LITTLE_COVERAGE",
    "SMALL_DELTA_CHI2",
    "NEGATIVE_MODEL",
    "MANY_OUTLIERS",
    "Z_FITLIMIT",
    "NEGATIVE_EMISSION",
    "UNPLUGGED",
)


@dataclass(frozen=True)
class ZWarningFlag:
    bit: int
    name: str


class CatalogError(ValueError):
    """Malformed catalog input, carrying the offending line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class CatalogRecord:
    """One survey object; (plate, mjd, fiberid) is the unique identifier."""

    plate: int
    mjd: int
    fiberid: int
    specboss: int
    zwarning: int
    obj_class: ObjectClass
    z: float

    def __post_init__(self):
        if self.plate <= 0 or self.mjd <= 0 or self.fiberid <= 0:
            raise ValueError("plate, mjd and fiberid must be positive")
        if self.specboss not in (0, 1):
            raise ValueError("specboss must be 0 or 1")
        if self.zwarning < 0:
            raise ValueError("zwarning must be non-negative")
        if not math.isfinite(self.z) or self.z <= -1.0:
            raise ValueError("z must be finite and > -1")

    @property
    def ident(self) -> tuple[int, int, int]:
        return (self.plate, self.mjd, self.fiberid)


def decode_zwarning(mask: int) -> list[ZWarningFlag]:
    """Return the flags for the set bits of `mask`, ascending bit order."""
    if mask < 0 or mask >= 256:
        raise ValueError(f"zwarning mask {mask} has unknown bits (must be < 256)")
    return [
        ZWarningFlag(bit, name)
        for bit, name in enumerate(ZWARNING_FLAGS)
        if mask & (1 << bit)
    ]


def parse_catalog(text: str) -> list[CatalogRecord]:
    """Parse catalog text into records, in file order.

    Raises CatalogError naming the line for any malformed line or duplicate
    (plate, mjd, fiberid) triple.
    """
    records: list[CatalogRecord] = []
    seen: dict[tuple[int, int, int], int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 7:
            raise CatalogError(lineno, f"expected 7 columns, got {len(fields)}")
        try:
            plate, mjd, fiberid, specboss, zwarning, code = (int(f) for f in fields[:6])
            z = float(fields[6])
        except ValueError:
            raise CatalogError(lineno, f"non-numeric field in {line!r}") from None
        try:
            obj_class = ObjectClass.from_code(code)
            rec = CatalogRecord(plate, mjd, fiberid, specboss, zwarning, obj_class, z)
        except ValueError as exc:
            raise CatalogError(lineno, str(exc)) from None
        if rec.ident in seen:
            raise CatalogError(
                lineno, f"duplicate identifier {rec.ident} (first at line {seen[rec.ident]})"
            )
        seen[rec.ident] = lineno
        records.append(rec)
    return records


def serialize_catalog(records: list[CatalogRecord]) -> str:
    """Inverse of parse_catalog; redshift keeps 10 decimal places."""
    lines = ["#PLATE MJD FIBERID SPECBOSS ZWARNING CLASS Z"]
    for r in records:
        lines.append(
            f"{r.plate} {r.mjd} {r.fiberid} {r.specboss} {r.zwarning} "
            f"{int(r.obj_class)} {r.z:.10f}"
        )
    return "\n".join(lines) + "\n"


def filter_good(records: list[CatalogRecord]) -> list[CatalogRecord]:
    """Keep the science-grade records: specboss=1 and zwarning=0, order kept."""
    return [r for r in records if r.specboss == 1 and r.zwarning == 0]
