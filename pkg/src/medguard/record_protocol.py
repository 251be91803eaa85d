"""Canonical serialization, signing, and verification of care records.

A record travels as a *signed blob*: the canonical payload bytes with the
32-byte digest appended at the end, nothing else.  Stripping the final 32
bytes recovers the payload; recomputing its digest and comparing against
the appended value is the whole integrity check.

The canonical encoding is a key-sorted list of (key, value) string pairs,
each length-prefixed with a 4-byte big-endian count of UTF-8 bytes.  List
fields are flattened with zero-padded indices so that sorting preserves
order; map fields get a key prefix so their iteration order can never
leak into the bytes.  Equal records therefore serialize byte-identically
on any platform, which is what makes digest comparison between parties
meaningful.
"""

from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence, Union

from .sha256_core import digest as sha256_digest

__all__ = [
    "InvalidRecord",
    "TamperDetected",
    "MalformedBlob",
    "MEAL_TAGS",
    "GlucoseReading",
    "HealthRecord",
    "ScheduleEntry",
    "SafetyLimits",
    "DEFAULT_LIMITS",
    "PrescriptionCommand",
    "SignedBlob",
    "canonical_serialize",
    "canonical_parse",
    "sign",
    "verify",
    "verify_bytes",
    "record_to_json",
    "record_from_json",
]


class InvalidRecord(ValueError):
    """A record or command violates its invariants."""


class TamperDetected(Exception):
    """Recomputed digest differs from the appended one; the blob is discarded."""


class MalformedBlob(Exception):
    """Blob too short to hold a digest, or its payload does not parse."""


MEAL_TAGS = ("AC-breakfast", "PC-breakfast", "AC-dinner", "PC-dinner", "other")

GLUCOSE_MIN_MG_DL = 0
GLUCOSE_MAX_MG_DL = 1000

_TIME_OF_DAY = re.compile(r"^(?:[01][0-9]|2[0-3]):[0-5][0-9]$")
_MAX_LIST_ENTRIES = 10_000  # keeps the zero-padded flattening indices at 4 digits


def _check_time_of_day(value: str, what: str) -> None:
    if not isinstance(value, str) or not _TIME_OF_DAY.match(value):
        raise InvalidRecord(f"{what} must be an HH:MM time of day, got {value!r}")


@dataclass(frozen=True)
class GlucoseReading:
    time_of_day: str
    value_mg_dl: int
    meal_tag: str

    def __post_init__(self) -> None:
        _check_time_of_day(self.time_of_day, "glucose reading time")
        if not isinstance(self.value_mg_dl, int) or isinstance(self.value_mg_dl, bool):
            raise InvalidRecord(f"glucose value must be an integer, got {self.value_mg_dl!r}")
        if not GLUCOSE_MIN_MG_DL <= self.value_mg_dl <= GLUCOSE_MAX_MG_DL:
            raise InvalidRecord(
                f"glucose value {self.value_mg_dl} outside [{GLUCOSE_MIN_MG_DL}, {GLUCOSE_MAX_MG_DL}] mg/dL"
            )
        if self.meal_tag not in MEAL_TAGS:
            raise InvalidRecord(f"unknown meal tag {self.meal_tag!r}; expected one of {MEAL_TAGS}")


@dataclass(frozen=True)
class HealthRecord:
    """Patient measurements plus profile fields; the unit of storage."""

    patient_id: str
    timestamp: int
    glucose_readings: tuple[GlucoseReading, ...] = ()
    profile: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not isinstance(self.patient_id, str) or not self.patient_id:
            raise InvalidRecord("patient_id must be a non-empty string")
        if not isinstance(self.timestamp, int) or isinstance(self.timestamp, bool) or self.timestamp < 0:
            raise InvalidRecord(f"timestamp must be a non-negative integer, got {self.timestamp!r}")
        readings = tuple(
            r if isinstance(r, GlucoseReading) else GlucoseReading(*r) for r in self.glucose_readings
        )
        if len(readings) >= _MAX_LIST_ENTRIES:
            raise InvalidRecord("too many glucose readings")
        for earlier, later in zip(readings, readings[1:]):
            if later.time_of_day < earlier.time_of_day:
                raise InvalidRecord(
                    f"glucose readings out of order: {later.time_of_day} after {earlier.time_of_day}"
                )
        profile = dict(self.profile)
        for key, value in profile.items():
            if not isinstance(key, str) or not key:
                raise InvalidRecord(f"profile keys must be non-empty strings, got {key!r}")
            if not isinstance(value, str):
                raise InvalidRecord(f"profile values must be strings, got {value!r} for {key!r}")
        object.__setattr__(self, "glucose_readings", readings)
        object.__setattr__(self, "profile", profile)


@dataclass(frozen=True)
class ScheduleEntry:
    time_of_day: str
    dose_units: float
    rate_units_per_hour: float

    def __post_init__(self) -> None:
        _check_time_of_day(self.time_of_day, "schedule entry time")
        object.__setattr__(self, "dose_units", float(self.dose_units))
        object.__setattr__(self, "rate_units_per_hour", float(self.rate_units_per_hour))
        if not self.dose_units > 0:
            raise InvalidRecord(f"dose must be positive, got {self.dose_units}")
        if not self.rate_units_per_hour > 0:
            raise InvalidRecord(f"rate must be positive, got {self.rate_units_per_hour}")


@dataclass(frozen=True)
class SafetyLimits:
    """Caps a dosing schedule must respect before a pump will accept it."""

    max_dose_units: float = 25.0
    max_rate_units_per_hour: float = 30.0


DEFAULT_LIMITS = SafetyLimits()


@dataclass(frozen=True)
class PrescriptionCommand:
    """A dosing-schedule directive flowing caregiver or physician to pump.

    Construction checks structure (positive doses, valid times, non-empty
    schedule).  The configurable caps are checked by ``check_limits``,
    which the receiving controller applies with *its own* configuration
    before any schedule change.
    """

    command_id: str
    patient_id: str
    issuer: str
    schedule: tuple[ScheduleEntry, ...]
    issued_at: int

    def __post_init__(self) -> None:
        for name in ("command_id", "patient_id", "issuer"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value:
                raise InvalidRecord(f"{name} must be a non-empty string")
        if not isinstance(self.issued_at, int) or isinstance(self.issued_at, bool) or self.issued_at < 0:
            raise InvalidRecord(f"issued_at must be a non-negative integer, got {self.issued_at!r}")
        entries = tuple(e if isinstance(e, ScheduleEntry) else ScheduleEntry(*e) for e in self.schedule)
        if not entries:
            raise InvalidRecord("schedule must not be empty")
        if len(entries) >= _MAX_LIST_ENTRIES:
            raise InvalidRecord("too many schedule entries")
        object.__setattr__(self, "schedule", entries)

    def check_limits(self, limits: SafetyLimits = DEFAULT_LIMITS) -> None:
        """Raise InvalidRecord if any entry exceeds the given caps."""
        for entry in self.schedule:
            if entry.dose_units > limits.max_dose_units:
                raise InvalidRecord(
                    f"dose {entry.dose_units} exceeds cap {limits.max_dose_units} units"
                )
            if entry.rate_units_per_hour > limits.max_rate_units_per_hour:
                raise InvalidRecord(
                    f"rate {entry.rate_units_per_hour} exceeds cap "
                    f"{limits.max_rate_units_per_hour} units/hour"
                )


Record = Union[HealthRecord, PrescriptionCommand]

DIGEST_SIZE = 32


@dataclass(frozen=True)
class SignedBlob:
    """Canonical payload bytes with the 32-byte digest appended."""

    payload: bytes
    digest: bytes

    def __post_init__(self) -> None:
        if len(self.digest) != DIGEST_SIZE:
            raise MalformedBlob(f"digest must be {DIGEST_SIZE} bytes, got {len(self.digest)}")
        if not self.payload:
            raise MalformedBlob("payload must not be empty")

    def to_bytes(self) -> bytes:
        return self.payload + self.digest

    @classmethod
    def from_bytes(cls, raw: bytes) -> "SignedBlob":
        if len(raw) < DIGEST_SIZE + 1:
            raise MalformedBlob(
                f"blob of {len(raw)} bytes cannot hold a payload and a {DIGEST_SIZE}-byte digest"
            )
        return cls(payload=raw[:-DIGEST_SIZE], digest=raw[-DIGEST_SIZE:])


# --- canonical pair encoding ------------------------------------------------

def _record_pairs(record: Record) -> list[tuple[str, str]]:
    if isinstance(record, HealthRecord):
        pairs = [
            ("type", "health_record"),
            ("patient_id", record.patient_id),
            ("timestamp", str(record.timestamp)),
        ]
        for i, reading in enumerate(record.glucose_readings):
            prefix = f"glucose.{i:04d}"
            pairs.append((f"{prefix}.time", reading.time_of_day))
            pairs.append((f"{prefix}.value", str(reading.value_mg_dl)))
            pairs.append((f"{prefix}.tag", reading.meal_tag))
        for key, value in record.profile.items():
            pairs.append((f"profile.{key}", value))
        return pairs
    if isinstance(record, PrescriptionCommand):
        pairs = [
            ("type", "prescription_command"),
            ("command_id", record.command_id),
            ("patient_id", record.patient_id),
            ("issuer", record.issuer),
            ("issued_at", str(record.issued_at)),
        ]
        for i, entry in enumerate(record.schedule):
            prefix = f"schedule.{i:04d}"
            pairs.append((f"{prefix}.time", entry.time_of_day))
            pairs.append((f"{prefix}.dose", repr(entry.dose_units)))
            pairs.append((f"{prefix}.rate", repr(entry.rate_units_per_hour)))
        return pairs
    raise InvalidRecord(f"cannot serialize object of type {type(record).__name__}")


def canonical_serialize(record: Record) -> bytes:
    """Deterministic, self-delimiting bytes for a record or command."""
    out = bytearray()
    for key, value in sorted(_record_pairs(record)):
        kb = key.encode("utf-8")
        vb = value.encode("utf-8")
        out += struct.pack(">I", len(kb)) + kb + struct.pack(">I", len(vb)) + vb
    return bytes(out)


def _decode_pairs(payload: bytes) -> Iterator[tuple[str, str]]:
    pos = 0
    n = len(payload)
    while pos < n:
        for _ in range(2):
            if pos + 4 > n:
                raise MalformedBlob("truncated length prefix in payload")
            (length,) = struct.unpack_from(">I", payload, pos)
            pos += 4
            if pos + length > n:
                raise MalformedBlob("field runs past end of payload")
            yield payload[pos : pos + length].decode("utf-8")
            pos += length


def _pairs_to_multimap(payload: bytes) -> dict[str, str]:
    items = list(_decode_pairs(payload))
    if len(items) % 2:
        raise MalformedBlob("odd number of strings in payload")
    fields: dict[str, str] = {}
    for key, value in zip(items[0::2], items[1::2]):
        if key in fields:
            raise MalformedBlob(f"duplicate field {key!r}")
        fields[key] = value
    return fields


def _collect_indexed(fields: dict[str, str], prefix: str, parts: Sequence[str]) -> list[dict[str, str]]:
    rows: dict[int, dict[str, str]] = {}
    for key in sorted(fields):
        if not key.startswith(prefix + "."):
            continue
        try:
            _, index, part = key.split(".", 2)
            i = int(index)
        except ValueError as exc:
            raise MalformedBlob(f"bad list key {key!r}") from exc
        if part not in parts:
            raise MalformedBlob(f"unknown list part in {key!r}")
        rows.setdefault(i, {})[part] = fields.pop(key)
    out = []
    for i in range(len(rows)):
        if i not in rows or set(rows[i]) != set(parts):
            raise MalformedBlob(f"list entries of {prefix!r} not contiguous and complete")
        out.append(rows[i])
    return out


def canonical_parse(payload: bytes) -> Record:
    """Invert ``canonical_serialize``; raises MalformedBlob, then InvalidRecord."""
    try:
        fields = _pairs_to_multimap(payload)
    except UnicodeDecodeError as exc:
        raise MalformedBlob("payload is not UTF-8") from exc
    kind = fields.pop("type", None)
    try:
        if kind == "health_record":
            readings = [
                GlucoseReading(row["time"], int(row["value"]), row["tag"])
                for row in _collect_indexed(fields, "glucose", ("time", "value", "tag"))
            ]
            profile = {
                key[len("profile.") :]: fields.pop(key)
                for key in sorted(fields)
                if key.startswith("profile.")
            }
            record = HealthRecord(
                patient_id=fields.pop("patient_id", ""),
                timestamp=int(fields.pop("timestamp", "-1")),
                glucose_readings=tuple(readings),
                profile=profile,
            )
        elif kind == "prescription_command":
            entries = [
                ScheduleEntry(row["time"], float(row["dose"]), float(row["rate"]))
                for row in _collect_indexed(fields, "schedule", ("time", "dose", "rate"))
            ]
            record = PrescriptionCommand(
                command_id=fields.pop("command_id", ""),
                patient_id=fields.pop("patient_id", ""),
                issuer=fields.pop("issuer", ""),
                schedule=tuple(entries),
                issued_at=int(fields.pop("issued_at", "-1")),
            )
        else:
            raise MalformedBlob(f"unknown record type {kind!r}")
    except ValueError as exc:
        if isinstance(exc, InvalidRecord):
            raise
        raise MalformedBlob(f"unparseable field value: {exc}") from exc
    if fields:
        raise MalformedBlob(f"unexpected fields {sorted(fields)!r}")
    return record


def sign(record: Record) -> SignedBlob:
    """Serialize canonically and append the payload digest."""
    payload = canonical_serialize(record)
    return SignedBlob(payload=payload, digest=sha256_digest(payload))


def verify(blob: SignedBlob) -> Record:
    """Recompute the payload digest; equal means valid, else the blob is discarded."""
    actual = sha256_digest(blob.payload)
    if actual != blob.digest:
        raise TamperDetected(
            f"digest mismatch: appended {blob.digest.hex()} != computed {actual.hex()}"
        )
    return canonical_parse(blob.payload)


def verify_bytes(raw: bytes) -> Record:
    return verify(SignedBlob.from_bytes(raw))


# --- human-editable JSON form (CLI input) -----------------------------------

def record_to_json(record: Record, indent: int | None = 2) -> str:
    if isinstance(record, HealthRecord):
        doc = {
            "type": "health_record",
            "patient_id": record.patient_id,
            "timestamp": record.timestamp,
            "glucose_readings": [
                [r.time_of_day, r.value_mg_dl, r.meal_tag] for r in record.glucose_readings
            ],
            "profile": dict(record.profile),
        }
    else:
        doc = {
            "type": "prescription_command",
            "command_id": record.command_id,
            "patient_id": record.patient_id,
            "issuer": record.issuer,
            "issued_at": record.issued_at,
            "schedule": [
                [e.time_of_day, e.dose_units, e.rate_units_per_hour] for e in record.schedule
            ],
        }
    return json.dumps(doc, indent=indent)


def record_from_json(text: str, limits: SafetyLimits = DEFAULT_LIMITS) -> Record:
    """Parse the editable JSON form; commands are checked against ``limits``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidRecord(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidRecord("top-level JSON value must be an object")
    kind = doc.get("type")
    try:
        if kind == "health_record":
            return HealthRecord(
                patient_id=doc.get("patient_id", ""),
                timestamp=doc.get("timestamp", -1),
                glucose_readings=tuple(
                    GlucoseReading(*entry) for entry in doc.get("glucose_readings", [])
                ),
                profile=doc.get("profile", {}),
            )
        if kind == "prescription_command":
            command = PrescriptionCommand(
                command_id=doc.get("command_id", ""),
                patient_id=doc.get("patient_id", ""),
                issuer=doc.get("issuer", ""),
                schedule=tuple(ScheduleEntry(*entry) for entry in doc.get("schedule", [])),
                issued_at=doc.get("issued_at", -1),
            )
            command.check_limits(limits)
            return command
    except TypeError as exc:
        raise InvalidRecord(f"malformed entry: {exc}") from exc
    raise InvalidRecord(f"unknown record type {kind!r}")
