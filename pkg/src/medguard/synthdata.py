"""Seeded synthetic records shaped like real daily diabetic samples.

Used by the benchmark and the scenario simulator; everything is a pure
function of the supplied RNG so runs replay exactly.
"""

from __future__ import annotations

from random import Random

from .record_protocol import (
    GlucoseReading,
    HealthRecord,
    PrescriptionCommand,
    ScheduleEntry,
)

_FIRST_NAMES = ("Alex", "Dana", "Imani", "Jordan", "Kai", "Mina", "Noor", "Sam")
_NOTES = (
    "stable overnight",
    "mild hypoglycemia reported",
    "adjusted carbohydrate intake",
    "exercise before dinner",
    "no incidents",
)

# (time of day, meal tag, typical mg/dL range)
_DAILY_SLOTS = (
    ("07:10", "AC-breakfast", (70, 180)),
    ("08:40", "PC-breakfast", (110, 260)),
    ("12:30", "other", (90, 220)),
    ("17:20", "AC-dinner", (80, 200)),
    ("19:05", "PC-dinner", (120, 280)),
    ("22:45", "other", (90, 210)),
)


def synthetic_health_record(rng: Random, patient_id: str, timestamp: int) -> HealthRecord:
    """One day of meal-tagged glucose readings plus summary profile fields."""
    readings = tuple(
        GlucoseReading(time_of_day, rng.randint(low, high), tag)
        for time_of_day, tag, (low, high) in _DAILY_SLOTS
    )
    by_tag: dict[str, list[int]] = {}
    for reading in readings:
        by_tag.setdefault(reading.meal_tag, []).append(reading.value_mg_dl)
    profile = {
        "name": rng.choice(_FIRST_NAMES),
        "age": str(rng.randint(18, 90)),
        "notes": rng.choice(_NOTES),
    }
    for tag in ("AC-breakfast", "PC-breakfast", "AC-dinner", "PC-dinner"):
        values = by_tag.get(tag, [])
        if values:
            label = tag.replace("-", " ") + " Mean"
            profile[label] = str(round(sum(values) / len(values)))
    return HealthRecord(
        patient_id=patient_id,
        timestamp=timestamp,
        glucose_readings=readings,
        profile=profile,
    )


def synthetic_command(
    rng: Random,
    command_id: str,
    patient_id: str,
    issuer: str,
    issued_at: int,
    n_entries: int = 3,
) -> PrescriptionCommand:
    """A plausible basal/bolus schedule within default safety caps."""
    hours = sorted(rng.sample(range(6, 23), n_entries))
    schedule = tuple(
        ScheduleEntry(
            time_of_day=f"{hour:02d}:{rng.randrange(0, 60, 5):02d}",
            dose_units=round(rng.uniform(0.5, 8.0), 2),
            rate_units_per_hour=round(rng.uniform(0.5, 4.0), 2),
        )
        for hour in hours
    )
    return PrescriptionCommand(
        command_id=command_id,
        patient_id=patient_id,
        issuer=issuer,
        schedule=schedule,
        issued_at=issued_at,
    )
