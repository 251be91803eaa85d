"""Simulator flows, fault injection, queues, safe-hold, and determinism."""

from __future__ import annotations

from random import Random

import pytest

from medguard import system_sim as sim
from medguard.record_protocol import (
    PrescriptionCommand,
    ScheduleEntry,
    TamperDetected,
)
from medguard.reliability import FAILURE_EDGES, RECOVERY_EDGES
from medguard.synthdata import synthetic_command, synthetic_health_record


def make_sim(**kwargs) -> sim.Simulation:
    return sim.Simulation(sim.SimConfig(**kwargs))


def make_command(dose=4.0, rate=1.0, cid="cmd-t1", patient="patient-1"):
    return PrescriptionCommand(
        command_id=cid,
        patient_id=patient,
        issuer="physician-1",
        schedule=(ScheduleEntry("08:00", dose, rate),),
        issued_at=1_700_000_000,
    )


# --- store flow -------------------------------------------------------------------

def test_store_then_both_stores_hold_identical_bytes():
    s = make_sim()
    record = synthetic_health_record(s.rng, "patient-1", 1_700_000_100)
    outcome = s.store_flow(record, at=1.0)
    assert outcome.status == "stored" and outcome.cloud_committed
    assert s.local_store[outcome.key] == s.cloud.records[outcome.key]
    assert s.cloud.records[outcome.key] == s.cloud.replica[outcome.key]


def test_store_during_cloud_fault_queues_then_drains_on_recovery():
    s = make_sim()
    s.inject_fault(3, at=1.0)
    record = synthetic_health_record(s.rng, "patient-1", 1_700_000_100)
    outcome = s.store_flow(record, at=2.0)
    assert outcome.status == "channel_down"
    assert outcome.local_stored and not outcome.cloud_committed
    assert outcome.key not in s.cloud.records
    s.recover(at=3.0)
    assert s.cloud.records[outcome.key] == s.local_store[outcome.key]
    assert not s.offline_queue


def test_store_during_link_fault_reports_channel_down():
    s = make_sim()
    s.inject_fault(4, at=1.0)
    record = synthetic_health_record(s.rng, "patient-1", 1_700_000_100)
    assert s.store_flow(record, at=2.0).status == "channel_down"
    s.recover(at=3.0)
    record2 = synthetic_health_record(s.rng, "patient-1", 1_700_000_400)
    assert s.store_flow(record2, at=4.0).status == "stored"


def test_corrupted_in_flight_store_is_rejected_then_retried():
    s = make_sim()
    record = synthetic_health_record(s.rng, "patient-1", 1_700_000_100)
    s.arm_wire_tamper(byte_index=10, at=1.0)
    outcome = s.store_flow(record, at=1.5)
    assert outcome.status == "tamper_retry"
    assert outcome.key not in s.cloud.records
    assert "tamper_detected" in s.log.kinds()
    s.sync(at=2.0)
    assert s.cloud.records[outcome.key] == s.local_store[outcome.key]


def test_store_during_power_failure_is_held_then_flushed():
    s = make_sim()
    s.inject_fault(5, at=1.0)
    record = synthetic_health_record(s.rng, "patient-1", 1_700_000_100)
    outcome = s.store_flow(record, at=2.0)
    assert outcome.status == "held" and not outcome.local_stored
    assert outcome.key not in s.local_store
    s.recover(at=3.0)
    assert s.local_store[outcome.key] == s.cloud.records[outcome.key]


def test_store_for_unlinked_patient_denied():
    s = make_sim()
    record = synthetic_health_record(s.rng, "stranger-9", 1_700_000_100)
    with pytest.raises(sim.Deny):
        s.store_flow(record, at=1.0)


# --- monitor flow ------------------------------------------------------------------

def test_monitor_returns_stored_record():
    s = make_sim()
    record = synthetic_health_record(s.rng, "patient-1", 1_700_000_100)
    s.store_flow(record, at=1.0)
    assert s.monitor_flow("physician-1", "patient-1", at=2.0) == record


def test_monitor_without_consent_denied():
    s = make_sim()
    record = synthetic_health_record(s.rng, "patient-1", 1_700_000_100)
    s.store_flow(record, at=1.0)
    with pytest.raises(sim.Deny):
        s.monitor_flow("researcher-1", "patient-1", at=2.0)


def test_monitor_missing_patient_not_found():
    s = make_sim()
    with pytest.raises(sim.NotFound):
        s.monitor_flow("physician-1", "patient-1", at=1.0)


def test_monitor_of_tampered_at_rest_blob_detects():
    s = make_sim()
    record = synthetic_health_record(s.rng, "patient-1", 1_700_000_100)
    s.store_flow(record, at=1.0)
    s.tamper_stored("patient-1", at=2.0)
    with pytest.raises(TamperDetected):
        s.monitor_flow("physician-1", "patient-1", at=3.0)
    assert s.log.kinds()[-1] == "tamper_detected"


def test_monitor_during_cloud_fault_channel_down():
    s = make_sim()
    record = synthetic_health_record(s.rng, "patient-1", 1_700_000_100)
    s.store_flow(record, at=1.0)
    s.inject_fault(3, at=2.0)
    with pytest.raises(sim.ChannelDown):
        s.monitor_flow("physician-1", "patient-1", at=3.0)


# --- command flow -------------------------------------------------------------------

def test_valid_command_applies_and_bumps_version():
    s = make_sim()
    outcome = s.command_flow(make_command(), "physician-1", at=1.0)
    assert outcome.status == "applied"
    assert outcome.schedule_version == 1
    assert s.schedule.entries == make_command().schedule
    assert s.schedule.source_command_id == "cmd-t1"
    assert "serial_transfer" in s.log.kinds()


def test_caregiver_may_issue_commands():
    s = make_sim()
    command = synthetic_command(Random(8), "cmd-cg", "patient-1", "caregiver-1", 1_700_000_000)
    assert s.command_flow(command, "caregiver-1", at=1.0).status == "applied"


def test_patient_may_not_issue_commands():
    s = make_sim()
    with pytest.raises(sim.Deny):
        s.command_flow(make_command(), "patient-1", at=1.0)


def test_tampered_command_discarded_version_unchanged():
    s = make_sim()
    s.command_flow(make_command(cid="cmd-first"), "physician-1", at=1.0)
    s.arm_wire_tamper(byte_index=40, at=2.0)
    outcome = s.command_flow(make_command(dose=9.0, cid="cmd-evil"), "physician-1", at=3.0)
    assert outcome.status == "tamper_rejected"
    assert s.schedule.version == 1
    assert s.schedule.source_command_id == "cmd-first"


def test_overdose_command_rejected_at_controller_precheck():
    s = make_sim()
    outcome = s.command_flow(make_command(dose=26.0), "physician-1", at=1.0)
    assert outcome.status == "bounds_rejected"
    assert s.schedule.version == 0
    assert not s.schedule.entries  # never reached the pump


def test_command_parks_while_pump_failed_and_applies_after_recovery():
    s = make_sim()
    s.inject_fault(2, at=1.0)
    outcome = s.command_flow(make_command(), "physician-1", at=2.0)
    assert outcome.status == "parked"
    assert s.schedule.version == 0
    s.recover(at=3.0)
    assert s.schedule.version == 1


def test_command_parks_at_cloud_while_controller_down():
    s = make_sim()
    s.inject_fault(5, at=1.0)
    outcome = s.command_flow(make_command(), "physician-1", at=2.0)
    assert outcome.status == "parked"
    s.recover(at=3.0)
    assert s.schedule.version == 1


def test_schedule_version_never_decreases():
    s = make_sim()
    versions = [s.schedule.version]
    s.command_flow(make_command(cid="a"), "physician-1", at=1.0)
    versions.append(s.schedule.version)
    s.arm_wire_tamper(at=2.0)
    s.command_flow(make_command(cid="b"), "physician-1", at=3.0)
    versions.append(s.schedule.version)
    s.command_flow(make_command(dose=30.0, cid="c"), "physician-1", at=4.0)
    versions.append(s.schedule.version)
    s.command_flow(make_command(cid="d"), "physician-1", at=5.0)
    versions.append(s.schedule.version)
    assert versions == sorted(versions)
    assert s.schedule.version == 2  # only the two verified commands applied


# --- fault graph --------------------------------------------------------------------

def test_fault_edges_match_reliability_graph():
    s = make_sim()
    with pytest.raises(sim.IllegalTransition):
        s.inject_fault(9, at=1.0)  # 1->9 is not an edge
    s.inject_fault(2, at=2.0)
    with pytest.raises(sim.IllegalTransition):
        s.inject_fault(3, at=3.0)  # 2->3 is not an edge
    s.inject_fault(9, at=4.0)  # 2->9 is
    assert s.markov_state == 9


def test_deep_failure_path_and_single_recovery_exit():
    s = make_sim()
    s.inject_fault(2, at=1.0)
    s.inject_fault(9, at=2.0)
    s.inject_fault(11, at=3.0)
    s.inject_fault(12, at=4.0)
    assert s.markov_state == 12
    assert not s.dosing_allowed and not s.cloud_reachable and not s.mcu_operational
    s.recover(at=5.0)
    assert s.markov_state == 1


def test_state_10_has_no_recovery():
    s = make_sim()
    s.inject_fault(3, at=1.0)
    s.inject_fault(6, at=2.0)
    s.inject_fault(10, at=3.0)
    with pytest.raises(sim.IllegalTransition):
        s.recover(at=4.0)
    s.inject_fault(12, at=5.0)
    s.recover(at=6.0)
    assert s.markov_state == 1


def test_recovery_climbs_one_level_at_a_time():
    s = make_sim()
    s.inject_fault(2, at=1.0)
    s.inject_fault(8, at=2.0)
    s.recover(at=3.0)
    assert s.markov_state == 2
    statuses = {c.component: c.status for c in s.component_states()}
    assert statuses["pump"] == "recovering"
    s.recover(at=4.0)
    assert s.markov_state == 1
    statuses = {c.component: c.status for c in s.component_states()}
    assert all(status == "normal" for status in statuses.values())


def test_component_status_mapping():
    s = make_sim()
    s.inject_fault(4, at=1.0)
    statuses = {c.component: c.status for c in s.component_states()}
    assert statuses["link"] == "sw_failed"
    assert statuses["pump"] == "normal"
    s.recover(at=2.0)
    s.inject_fault(5, at=3.0)
    statuses = {c.component: c.status for c in s.component_states()}
    assert statuses["power"] == "hw_failed"
    assert not s.mcu_operational


# --- dosing / safe-hold ----------------------------------------------------------------

def test_no_dose_without_schedule():
    s = make_sim()
    assert s.deliver_dose(at=1.0) is None
    assert s.log.kinds()[-1] == "dose_skipped"


def test_safe_hold_suppresses_doses_until_recovery():
    s = make_sim()
    s.command_flow(make_command(), "physician-1", at=1.0)
    assert s.deliver_dose(at=2.0) is not None
    s.inject_fault(2, at=3.0)
    for t in (4.0, 5.0, 6.0):
        assert s.deliver_dose(at=t) is None
    assert s.log.kinds().count("dose") == 1
    assert s.log.kinds().count("dose_suppressed") == 3
    s.recover(at=7.0)
    assert s.deliver_dose(at=8.0) is not None


def test_power_failure_also_suppresses_doses():
    s = make_sim()
    s.command_flow(make_command(), "physician-1", at=1.0)
    s.inject_fault(5, at=2.0)
    assert s.deliver_dose(at=3.0) is None


# --- replica consistency ------------------------------------------------------------------

def test_replica_matches_records_at_quiescent_points():
    s = make_sim()
    for i in range(5):
        record = synthetic_health_record(s.rng, "patient-1", 1_700_000_000 + 300 * i)
        s.store_flow(record, at=float(i))
    assert s.cloud.consistent()
    s.inject_fault(3, at=10.0)
    record = synthetic_health_record(s.rng, "patient-1", 1_700_009_999)
    s.store_flow(record, at=11.0)
    s.recover(at=12.0)
    assert s.cloud.consistent()
    committed = set(s.cloud.records)
    assert {k: s.local_store[k] for k in committed} == s.cloud.records


# --- scenarios ------------------------------------------------------------------------------

STORE_TAMPER_FETCH = """
# store a record, corrupt it at rest, then fetch it
0.0 mcu store patient-1
1.0 attacker tamper-stored patient-1
2.0 physician-1 monitor patient-1
"""


def test_scenario_store_tamper_fetch_ends_with_detection():
    s = sim.run_scenario(STORE_TAMPER_FETCH, seed=5)
    assert s.log.entries[-1].kind == "tamper_detected"


def test_empty_script_yields_only_init_events():
    s = sim.run_scenario("", seed=5)
    assert set(s.log.kinds()) <= {"init", "session"}
    assert len(s.log.entries) > 0


def test_identical_script_and_seed_replay_byte_identically():
    script = """
    0.0 mcu store patient-1
    1.0 physician-1 monitor patient-1
    2.0 physician-1 command patient-1 4.5 1.5 07:30
    3.0 pump deliver
    4.0 fault inject 3
    5.0 mcu store patient-1
    6.0 fault recover
    7.0 researcher-1 monitor patient-1
    """
    first = sim.run_scenario(script, seed=21).log.to_text()
    second = sim.run_scenario(script, seed=21).log.to_text()
    assert first == second


def test_different_seed_changes_record_content_not_structure():
    script = "0.0 mcu store patient-1\n"
    a = sim.run_scenario(script, seed=1)
    b = sim.run_scenario(script, seed=2)
    assert a.log.kinds() == b.log.kinds()
    assert a.log.to_text() != b.log.to_text()


def test_script_errors_carry_line_numbers():
    with pytest.raises(sim.ScriptError) as err:
        sim.run_scenario("0.0 mcu store patient-1\nbogus line\n")
    assert err.value.line_no == 2
    with pytest.raises(sim.ScriptError) as err:
        sim.run_scenario("0.0 fault inject 9\n")
    assert err.value.line_no == 1
    with pytest.raises(sim.ScriptError) as err:
        sim.run_scenario("5.0 mcu store patient-1\n1.0 mcu sync\n")
    assert err.value.line_no == 2


def test_time_may_not_move_backwards_in_direct_api():
    s = make_sim()
    s.sync(at=5.0)
    with pytest.raises(ValueError):
        s.sync(at=4.0)


def test_expected_failures_keep_the_scenario_running():
    script = """
    0.0 researcher-1 monitor patient-1
    1.0 mcu store patient-1
    2.0 physician-1 monitor patient-1
    """
    s = sim.run_scenario(script, seed=3)
    kinds = s.log.kinds()
    assert "deny" in kinds and "monitor_ok" in kinds


def test_event_log_text_format():
    s = sim.run_scenario("0.0 mcu store patient-1\n", seed=0)
    lines = s.log.to_text().splitlines()
    assert all(line.startswith("t=") and " seq=" in line and " kind=" in line for line in lines)
    sequence = [int(line.split(" seq=")[1].split(" ")[0]) for line in lines]
    assert sequence == list(range(len(lines)))


# --- end-to-end integrity (randomized) ----------------------------------------------------

def test_any_single_byte_mutation_between_sign_and_verify_is_detected():
    rng = Random(1234)
    s = make_sim()
    trials = 0
    for i in range(200):
        record = synthetic_health_record(rng, "patient-1", 1_700_100_000 + 300 * i)
        s.store_flow(record, at=float(i))
        key = ("patient-1", record.timestamp)
        for _ in range(5):
            trials += 1
            original = s.cloud.records[key]
            s.tamper_stored("patient-1", byte_index=rng.randrange(len(original)))
            with pytest.raises(TamperDetected):
                s.monitor_flow("physician-1", "patient-1")
            s.cloud.records[key] = original  # restore for the next trial
    assert trials == 1000
