"""Deterministic simulation of the pump / controller / cloud care loop.

Virtual time only: every action happens at an explicit time, every run is
a pure function of (script, seed), and the event log is byte-stable so
two runs can be diffed.  The three flows (store, monitor, command) move
signed blobs over sealed sessions exactly as the protocol modules define
them; fault injection walks the edges of the 12-state availability graph
and the flows observe the resulting component outages.

Failure semantics in one place:

- controller or power down: the controller enters safe-hold, dosing
  stops, store requests buffer until recovery ("held").
- cloud or link down: local writes succeed, cloud writes queue offline
  and drain on recovery ("channel_down").
- tampered bytes, in flight or at rest: verification fails at the
  receiving side, the write or command is discarded, queued store
  traffic retries.
- pump down with controller up: verified commands park at the
  controller and apply on recovery ("parked").
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from random import Random

from .record_protocol import (
    DEFAULT_LIMITS,
    HealthRecord,
    InvalidRecord,
    MalformedBlob,
    PrescriptionCommand,
    SafetyLimits,
    ScheduleEntry,
    TamperDetected,
    sign,
    verify_bytes,
)
from .reliability import FAILURE_EDGES, RECOVERY_EDGES, STATE_LABELS
from .secure_channel import (
    AccessPolicy,
    KeyDirectory,
    Principal,
    SessionContext,
    authorize,
    handshake,
    make_principal,
    seal,
    unseal,
)
from .synthdata import synthetic_health_record

__all__ = [
    "IllegalTransition",
    "ChannelDown",
    "Deny",
    "NotFound",
    "ScriptError",
    "COMPONENTS",
    "ComponentState",
    "InsulinSchedule",
    "CloudStore",
    "StoreOutcome",
    "CommandOutcome",
    "LogEntry",
    "EventLog",
    "SimConfig",
    "Simulation",
    "run_scenario",
]


class IllegalTransition(Exception):
    """Requested state change is not an edge of the availability graph."""


class ChannelDown(Exception):
    """The cloud (or the link to it) is faulted; remote I/O is impossible."""


class Deny(Exception):
    """Authorization refused the action."""


class NotFound(Exception):
    """No committed record under the requested key."""


class ScriptError(ValueError):
    """Scenario script failed to parse or requested an illegal transition."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


COMPONENTS = ("pump", "microcontroller", "cloud", "power", "link")

# Component outage implied by each graph state.  Statuses are derived
# from the current state, so they can never drift out of sync with it.
_STATE_STATUS: dict[int, dict[str, str]] = {
    1: {},
    2: {"pump": "hw_failed"},
    3: {"cloud": "sw_failed"},
    4: {"link": "sw_failed"},
    5: {"power": "hw_failed"},
    6: {"cloud": "sw_failed"},
    7: {"cloud": "hw_failed"},
    8: {"pump": "sw_failed"},
    9: {"pump": "hw_failed"},
    10: {"cloud": "hw_failed"},
    11: {"pump": "hw_failed"},
    12: {c: "hw_failed" for c in COMPONENTS},
}

_MCU_DOWN_STATES = frozenset({5, 12})
_CLOUD_UNREACHABLE_STATES = frozenset({3, 4, 6, 7, 10, 12})
_PUMP_DOWN_STATES = frozenset({2, 8, 9, 11, 12})


@dataclass(frozen=True)
class ComponentState:
    component: str
    status: str


@dataclass(frozen=True)
class InsulinSchedule:
    """The pump's active schedule; version only moves forward."""

    entries: tuple[ScheduleEntry, ...] = ()
    version: int = 0
    source_command_id: str | None = None


class CloudStore:
    """Primary record map plus a replica kept identical on every commit."""

    def __init__(self) -> None:
        self.records: dict[tuple[str, int], bytes] = {}
        self.replica: dict[tuple[str, int], bytes] = {}

    def commit(self, key: tuple[str, int], blob: bytes) -> None:
        self.records[key] = blob
        self.replica[key] = blob

    def latest_key(self, patient_id: str) -> tuple[str, int] | None:
        keys = [k for k in self.records if k[0] == patient_id]
        return max(keys, key=lambda k: k[1]) if keys else None

    def consistent(self) -> bool:
        return self.records == self.replica


@dataclass(frozen=True)
class StoreOutcome:
    status: str  # stored | channel_down | tamper_retry | held
    key: tuple[str, int]
    local_stored: bool
    cloud_committed: bool


@dataclass(frozen=True)
class CommandOutcome:
    status: str  # applied | tamper_rejected | bounds_rejected | parked
    schedule_version: int
    command_id: str | None = None
    reason: str = ""


@dataclass(frozen=True)
class LogEntry:
    time: float
    seq: int
    component: str
    kind: str
    detail: str

    def to_line(self) -> str:
        return (
            f"t={self.time:.6f} seq={self.seq} component={self.component} "
            f"kind={self.kind} detail={self.detail}"
        )


class EventLog:
    """Append-only, totally ordered by (time, seq)."""

    def __init__(self) -> None:
        self.entries: list[LogEntry] = []

    def append(self, time: float, component: str, kind: str, detail: str = "") -> None:
        self.entries.append(
            LogEntry(time=time, seq=len(self.entries), component=component, kind=kind, detail=detail)
        )

    def kinds(self) -> list[str]:
        return [e.kind for e in self.entries]

    def to_text(self) -> str:
        return "\n".join(e.to_line() for e in self.entries) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    patients: tuple[str, ...] = ("patient-1",)
    mcu_limits: SafetyLimits = DEFAULT_LIMITS
    serial_bits_per_second: float = 6.25e6
    serial_frame_bits_per_byte: int = 10  # 1 start + 8 data + no parity + 1 stop
    base_timestamp: int = 1_700_000_000


_ROSTER = (
    ("mcu", "microcontroller"),
    ("cloud", "cloud"),
    ("physician-1", "physician"),
    ("caregiver-1", "caregiver"),
    ("researcher-1", "researcher"),
    ("patient-1", "patient"),
)


class Simulation:
    """Single-threaded by contract; run one instance per scenario."""

    def __init__(self, config: SimConfig | None = None) -> None:
        self.config = config or SimConfig()
        self.rng = Random(self.config.seed)
        self.now = 0.0
        self.log = EventLog()
        self.markov_state = 1
        self._recovering: frozenset[str] = frozenset()

        self.directory = KeyDirectory()
        self.principals: dict[str, Principal] = {}
        for pid, role in _ROSTER:
            principal = make_principal(pid, role, self.rng.randbytes(32))
            self.principals[pid] = principal
            self.directory.register(principal)
            self.log.append(self.now, pid, "init", f"registered role={role}")

        links = {
            "mcu": frozenset(self.config.patients),
            "physician-1": frozenset(self.config.patients),
            "caregiver-1": frozenset(self.config.patients),
            "patient-1": frozenset(p for p in self.config.patients if p == "patient-1"),
        }
        self.policy = AccessPolicy(links=links)

        # One sealed session between the cloud and every other principal;
        # both directions of a pair share the session, with independent
        # counters per direction.
        self._sessions: dict[str, tuple[SessionContext, SessionContext]] = {}
        cloud = self.principals["cloud"]
        for pid, _ in _ROSTER:
            if pid == "cloud":
                continue
            client_ctx, cloud_ctx = handshake(
                self.principals[pid], cloud, self.directory, rng=self.rng
            )
            self._sessions[pid] = (client_ctx, cloud_ctx)
            self.log.append(self.now, pid, "session", "established with cloud")

        self.local_store: dict[tuple[str, int], bytes] = {}
        self.cloud = CloudStore()
        self.offline_queue: list[tuple[tuple[str, int], bytes]] = []
        self.parked_at_cloud: list[bytes] = []
        self.parked_at_mcu: list[tuple[PrescriptionCommand, int]] = []
        self.held_records: list[HealthRecord] = []
        self.schedule = InsulinSchedule()
        self._tamper_wire: tuple[int, int] | None = None
        self._store_seq = 0
        self._command_seq = 0
        self.log.append(self.now, "sim", "init", f"state=1 seed={self.config.seed}")

    # -- state / status ------------------------------------------------------

    @property
    def mcu_operational(self) -> bool:
        return self.markov_state not in _MCU_DOWN_STATES

    @property
    def cloud_reachable(self) -> bool:
        return self.markov_state not in _CLOUD_UNREACHABLE_STATES

    @property
    def pump_operational(self) -> bool:
        return self.markov_state not in _PUMP_DOWN_STATES

    @property
    def dosing_allowed(self) -> bool:
        return self.pump_operational and self.mcu_operational

    def component_states(self) -> tuple[ComponentState, ...]:
        overrides = _STATE_STATUS[self.markov_state]
        states = []
        for component in COMPONENTS:
            status = overrides.get(component, "normal")
            if status != "normal" and component in self._recovering:
                status = "recovering"
            states.append(ComponentState(component=component, status=status))
        return tuple(states)

    def _advance(self, at: float | None) -> None:
        if at is None:
            return
        if at < self.now:
            raise ValueError(f"time may not move backwards: {at} < {self.now}")
        self.now = at

    # -- fault injection -------------------------------------------------------

    def inject_fault(self, state: int, at: float | None = None) -> None:
        self._advance(at)
        edge = (self.markov_state, state)
        if edge not in FAILURE_EDGES:
            raise IllegalTransition(
                f"no failure edge {edge[0]}->{edge[1]} in the availability graph"
            )
        could_dose = self.dosing_allowed
        self.markov_state = state
        self._recovering = frozenset()
        self.log.append(
            self.now, "sim", "fault", f"state {edge[0]}->{edge[1]} ({STATE_LABELS[state]})"
        )
        if could_dose and not self.dosing_allowed:
            self.log.append(self.now, "microcontroller", "safe_hold", "dosing paused")

    def recover(self, at: float | None = None) -> None:
        self._advance(at)
        edges = [e for e in RECOVERY_EDGES if e[0] == self.markov_state]
        if not edges:
            raise IllegalTransition(
                f"state {self.markov_state} ({STATE_LABELS[self.markov_state]}) has no recovery edge"
            )
        edge = edges[0]  # recovery edges are unique per state
        could_dose = self.dosing_allowed
        self.markov_state = edge[1]
        failed_now = set(_STATE_STATUS[self.markov_state])
        self._recovering = frozenset(failed_now)
        self.log.append(
            self.now, "sim", "recovery", f"state {edge[0]}->{edge[1]} ({STATE_LABELS[edge[1]]})"
        )
        if not could_dose and self.dosing_allowed:
            self.log.append(self.now, "microcontroller", "safe_hold_release", "dosing resumed")
        self._drain()

    # -- wire helpers ----------------------------------------------------------

    def arm_wire_tamper(self, byte_index: int = -1, bit: int = 0, at: float | None = None) -> None:
        """Corrupt one ciphertext byte of the next wire transfer."""
        self._advance(at)
        self._tamper_wire = (byte_index, bit % 8)
        self.log.append(self.now, "attacker", "wire_tamper_armed", f"byte={byte_index} bit={bit % 8}")

    def _transmit(self, sender: SessionContext, receiver: SessionContext, payload: bytes) -> bytes:
        wire = seal(sender, payload)
        if self._tamper_wire is not None:
            byte_index, bit = self._tamper_wire
            self._tamper_wire = None
            body = bytearray(wire)
            header = len(wire) - len(payload)
            index = header + (byte_index % len(payload))
            body[index] ^= 1 << bit
            wire = bytes(body)
            self.log.append(self.now, "attacker", "wire_tampered", f"offset={index}")
        return unseal(receiver, wire)

    def _session(self, principal_id: str) -> tuple[SessionContext, SessionContext]:
        return self._sessions[principal_id]

    # -- flows -----------------------------------------------------------------

    def _check_authorized(self, principal_id: str, action: str, patient_id: str) -> Principal:
        principal = self.principals[principal_id]
        if not authorize(principal, action, patient_id, self.policy):
            self.log.append(
                self.now, principal_id, "deny", f"action={action} patient={patient_id}"
            )
            raise Deny(f"{principal_id} may not {action} for {patient_id}")
        return principal

    def store_flow(self, record: HealthRecord, at: float | None = None) -> StoreOutcome:
        self._advance(at)
        self._check_authorized("mcu", "write_records", record.patient_id)
        key = (record.patient_id, record.timestamp)
        if not self.mcu_operational:
            self.held_records.append(record)
            self.log.append(self.now, "microcontroller", "held", f"key={key[0]}@{key[1]}")
            return StoreOutcome(status="held", key=key, local_stored=False, cloud_committed=False)
        raw = sign(record).to_bytes()
        return self._store_signed(key, raw)

    def _store_signed(self, key: tuple[str, int], raw: bytes) -> StoreOutcome:
        self.local_store[key] = raw
        self.log.append(
            self.now, "microcontroller", "store_local", f"key={key[0]}@{key[1]} bytes={len(raw)}"
        )
        if not self.cloud_reachable:
            self.offline_queue.append((key, raw))
            self.log.append(self.now, "microcontroller", "channel_down", f"key={key[0]}@{key[1]} queued")
            return StoreOutcome(status="channel_down", key=key, local_stored=True, cloud_committed=False)
        return self._send_to_cloud(key, raw)

    def _send_to_cloud(self, key: tuple[str, int], raw: bytes) -> StoreOutcome:
        mcu_ctx, cloud_ctx = self._session("mcu")
        received = self._transmit(mcu_ctx, cloud_ctx, raw)
        try:
            verify_bytes(received)
        except (TamperDetected, MalformedBlob):
            self.offline_queue.append((key, raw))
            self.log.append(
                self.now, "cloud", "tamper_detected",
                f"key={key[0]}@{key[1]} store rejected, queued for retry",
            )
            return StoreOutcome(status="tamper_retry", key=key, local_stored=True, cloud_committed=False)
        self.cloud.commit(key, received)
        self.log.append(self.now, "cloud", "cloud_commit", f"key={key[0]}@{key[1]} replica_synced")
        return StoreOutcome(status="stored", key=key, local_stored=True, cloud_committed=True)

    def monitor_flow(
        self, requester_id: str, patient_id: str, at: float | None = None
    ) -> HealthRecord:
        self._advance(at)
        self._check_authorized(requester_id, "read_records", patient_id)
        if not self.cloud_reachable:
            self.log.append(self.now, requester_id, "channel_down", "monitor aborted")
            raise ChannelDown("cloud unreachable")
        key = self.cloud.latest_key(patient_id)
        if key is None:
            self.log.append(self.now, "cloud", "not_found", f"patient={patient_id}")
            raise NotFound(f"no committed records for {patient_id}")
        raw = self.cloud.records[key]
        requester_ctx, cloud_ctx = self._session(requester_id)
        received = self._transmit(cloud_ctx, requester_ctx, raw)
        try:
            record = verify_bytes(received)
        except (TamperDetected, MalformedBlob):
            self.log.append(
                self.now, requester_id, "tamper_detected", f"key={key[0]}@{key[1]} record discarded"
            )
            raise
        self.log.append(self.now, requester_id, "monitor_ok", f"key={key[0]}@{key[1]}")
        if not isinstance(record, HealthRecord):
            raise NotFound(f"key {key} does not hold a health record")
        return record

    def command_flow(
        self, command: PrescriptionCommand, issuer_id: str, at: float | None = None
    ) -> CommandOutcome:
        self._advance(at)
        self._check_authorized(issuer_id, "issue_command", command.patient_id)
        if not self.cloud_reachable:
            self.log.append(self.now, issuer_id, "channel_down", "command aborted")
            raise ChannelDown("cloud unreachable")
        raw = sign(command).to_bytes()
        issuer_ctx, cloud_ctx = self._session(issuer_id)
        at_cloud = self._transmit(issuer_ctx, cloud_ctx, raw)
        self.log.append(self.now, "cloud", "command_relayed", f"command={command.command_id}")
        if not self.mcu_operational:
            self.parked_at_cloud.append(at_cloud)
            self.log.append(self.now, "cloud", "command_parked", f"command={command.command_id}")
            return CommandOutcome(
                status="parked", schedule_version=self.schedule.version,
                command_id=command.command_id, reason="controller unavailable",
            )
        mcu_ctx, cloud_mcu_ctx = self._session("mcu")
        at_mcu = self._transmit(cloud_mcu_ctx, mcu_ctx, at_cloud)
        return self._controller_handle_command(at_mcu)

    def _controller_handle_command(self, raw: bytes) -> CommandOutcome:
        try:
            record = verify_bytes(raw)
        except (TamperDetected, MalformedBlob):
            self.log.append(
                self.now, "microcontroller", "tamper_detected", "command discarded"
            )
            return CommandOutcome(
                status="tamper_rejected", schedule_version=self.schedule.version,
                reason="digest mismatch",
            )
        if not isinstance(record, PrescriptionCommand):
            self.log.append(self.now, "microcontroller", "command_rejected", "not a command")
            return CommandOutcome(
                status="tamper_rejected", schedule_version=self.schedule.version,
                reason="payload is not a command",
            )
        try:
            record.check_limits(self.config.mcu_limits)
        except InvalidRecord as exc:
            self.log.append(
                self.now, "microcontroller", "command_rejected",
                f"command={record.command_id} bounds: {exc}",
            )
            return CommandOutcome(
                status="bounds_rejected", schedule_version=self.schedule.version,
                command_id=record.command_id, reason=str(exc),
            )
        if not self.pump_operational:
            self.parked_at_mcu.append((record, len(raw)))
            self.log.append(
                self.now, "microcontroller", "command_parked", f"command={record.command_id}"
            )
            return CommandOutcome(
                status="parked", schedule_version=self.schedule.version,
                command_id=record.command_id, reason="pump unavailable",
            )
        return self._apply_schedule(record, len(raw))

    def _apply_schedule(self, command: PrescriptionCommand, wire_bytes: int) -> CommandOutcome:
        seconds = wire_bytes * self.config.serial_frame_bits_per_byte / self.config.serial_bits_per_second
        self.log.append(
            self.now, "pump", "serial_transfer", f"bytes={wire_bytes} seconds={seconds:.9f}"
        )
        self.schedule = InsulinSchedule(
            entries=command.schedule,
            version=self.schedule.version + 1,
            source_command_id=command.command_id,
        )
        self.log.append(
            self.now, "pump", "command_applied",
            f"command={command.command_id} version={self.schedule.version}",
        )
        return CommandOutcome(
            status="applied", schedule_version=self.schedule.version, command_id=command.command_id
        )

    def deliver_dose(self, time_of_day: str | None = None, at: float | None = None) -> ScheduleEntry | None:
        """Pump attempts its scheduled delivery; safe-hold suppresses it."""
        self._advance(at)
        entries = self.schedule.entries
        if not entries:
            self.log.append(self.now, "pump", "dose_skipped", "no schedule")
            return None
        entry = entries[0]
        if time_of_day is not None:
            matches = [e for e in entries if e.time_of_day == time_of_day]
            if not matches:
                self.log.append(self.now, "pump", "dose_skipped", f"no entry at {time_of_day}")
                return None
            entry = matches[0]
        if not self.dosing_allowed:
            self.log.append(
                self.now, "pump", "dose_suppressed",
                f"time={entry.time_of_day} units={entry.dose_units!r}",
            )
            return None
        self.log.append(
            self.now, "pump", "dose", f"time={entry.time_of_day} units={entry.dose_units!r}"
        )
        return entry

    def tamper_stored(self, patient_id: str, byte_index: int | None = None, at: float | None = None) -> None:
        """Flip one byte of the latest committed cloud blob for the patient."""
        self._advance(at)
        key = self.cloud.latest_key(patient_id)
        if key is None:
            raise NotFound(f"no committed records for {patient_id}")
        raw = bytearray(self.cloud.records[key])
        index = (len(raw) // 2) if byte_index is None else (byte_index % len(raw))
        raw[index] ^= 0x01
        self.cloud.records[key] = bytes(raw)
        self.log.append(
            self.now, "attacker", "tamper_stored", f"key={key[0]}@{key[1]} offset={index}"
        )

    def sync(self, at: float | None = None) -> None:
        self._advance(at)
        self._drain()

    def _drain(self) -> None:
        if self.mcu_operational and self.held_records:
            held, self.held_records = self.held_records, []
            self.log.append(self.now, "microcontroller", "sync", f"flushing {len(held)} held records")
            for record in held:
                key = (record.patient_id, record.timestamp)
                self._store_signed(key, sign(record).to_bytes())
        if self.mcu_operational and self.cloud_reachable and self.offline_queue:
            queued, self.offline_queue = self.offline_queue, []
            self.log.append(self.now, "microcontroller", "sync", f"draining {len(queued)} queued writes")
            for key, raw in queued:
                self._send_to_cloud(key, raw)
        if self.mcu_operational and self.cloud_reachable and self.parked_at_cloud:
            parked, self.parked_at_cloud = self.parked_at_cloud, []
            self.log.append(self.now, "cloud", "sync", f"forwarding {len(parked)} parked commands")
            mcu_ctx, cloud_mcu_ctx = self._session("mcu")
            for raw in parked:
                at_mcu = self._transmit(cloud_mcu_ctx, mcu_ctx, raw)
                self._controller_handle_command(at_mcu)
        if self.mcu_operational and self.pump_operational and self.parked_at_mcu:
            parked, self.parked_at_mcu = self.parked_at_mcu, []
            self.log.append(self.now, "microcontroller", "sync", f"applying {len(parked)} parked commands")
            for record, wire_bytes in parked:
                self._apply_schedule(record, wire_bytes)

    # -- scenario scripting ------------------------------------------------------

    def next_store_timestamp(self) -> int:
        self._store_seq += 1
        return self.config.base_timestamp + 300 * self._store_seq

    def next_command_id(self) -> str:
        self._command_seq += 1
        return f"cmd-{self._command_seq}"


_EXPECTED_FAILURES = (Deny, NotFound, ChannelDown, TamperDetected)


def run_scenario(script: str, seed: int = 0, config: SimConfig | None = None) -> Simulation:
    """Execute a line-oriented scenario: ``<time> <actor> <action> <args...>``.

    Expected protocol-level failures (deny, tamper, missing record,
    channel down) are logged and the scenario continues; parse errors and
    illegal fault transitions raise ScriptError with the line number.
    """
    sim = Simulation(config or SimConfig(seed=seed))
    last_time = 0.0
    for line_no, raw_line in enumerate(script.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 3:
            raise ScriptError(line_no, f"expected '<time> <actor> <action> ...', got {raw_line!r}")
        try:
            at = float(parts[0])
        except ValueError:
            raise ScriptError(line_no, f"bad time {parts[0]!r}") from None
        if at < last_time:
            raise ScriptError(line_no, f"time {at} moves backwards (last was {last_time})")
        last_time = at
        actor, action, args = parts[1], parts[2], parts[3:]
        try:
            _dispatch(sim, at, actor, action, args)
        except ScriptError:
            raise
        except _EXPECTED_FAILURES:
            continue
        except (IllegalTransition, InvalidRecord, KeyError, ValueError) as exc:
            raise ScriptError(line_no, f"{actor} {action}: {exc}") from exc
    return sim


def _dispatch(sim: Simulation, at: float, actor: str, action: str, args: list[str]) -> None:
    if actor == "fault":
        if action == "inject" and len(args) == 1:
            sim.inject_fault(int(args[0]), at=at)
            return
        if action == "recover" and not args:
            sim.recover(at=at)
            return
    elif actor == "attacker":
        if action == "tamper-stored" and len(args) == 1:
            sim.tamper_stored(args[0], at=at)
            return
        if action == "tamper-next-wire" and not args:
            sim.arm_wire_tamper(at=at)
            return
    elif actor == "pump":
        if action == "deliver" and len(args) <= 1:
            sim.deliver_dose(args[0] if args else None, at=at)
            return
    elif actor == "mcu" and action == "sync" and not args:
        sim.sync(at=at)
        return
    elif actor == "mcu" and action == "store" and len(args) == 1:
        record = synthetic_health_record(sim.rng, args[0], sim.next_store_timestamp())
        sim.store_flow(record, at=at)
        return
    elif action == "monitor" and len(args) == 1:
        if actor not in sim.principals:
            raise ValueError(f"unknown principal {actor!r}")
        sim.monitor_flow(actor, args[0], at=at)
        return
    elif action == "command" and len(args) in (3, 4):
        if actor not in sim.principals:
            raise ValueError(f"unknown principal {actor!r}")
        patient, dose, rate = args[0], float(args[1]), float(args[2])
        time_of_day = args[3] if len(args) == 4 else "08:00"
        command = PrescriptionCommand(
            command_id=sim.next_command_id(),
            patient_id=patient,
            issuer=actor,
            schedule=(ScheduleEntry(time_of_day, dose, rate),),
            issued_at=sim.config.base_timestamp + int(at),
        )
        sim.command_flow(command, actor, at=at)
        return
    raise ValueError(f"unknown action {actor!r} {action!r} with {len(args)} args")
