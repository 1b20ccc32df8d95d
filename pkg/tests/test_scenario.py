import pytest

from twinslice.scenario import (
    LambdaSchedule,
    Scenario,
    ScenarioParseError,
    ScenarioSemanticError,
    load_scenario,
    parse_scenario_text,
)
from twinslice.twin import DelayClass


def test_minimal_file_gets_documented_defaults(tmp_path):
    p = tmp_path / "s.cfg"
    p.write_text("# nothing but a comment\n")
    s = load_scenario(p)
    assert s.urllc_fraction == 0.5
    assert s.twin_delay is DelayClass.MINIMAL
    assert s.outage_window == 100
    assert s.n_embb == 10 and s.n_urllc == 10
    assert s.qos.urllc_packet_bits == 256
    assert s.qos.urllc_outage_threshold == 0.07


def test_out_of_range_threshold_names_the_invariant():
    with pytest.raises(ScenarioSemanticError, match="urllc_outage_threshold out of range"):
        parse_scenario_text("[qos]\nurllc_outage_threshold = 1.5\n")


def test_duplicate_key_is_a_parse_error():
    text = "[run]\nseed = 1\nseed = 2\n"
    with pytest.raises(ScenarioParseError, match="duplicate key") as exc:
        parse_scenario_text(text)
    assert exc.value.line == 3


def test_duplicate_section_is_a_parse_error():
    with pytest.raises(ScenarioParseError, match="duplicate section"):
        parse_scenario_text("[run]\nseed = 1\n[run]\n")


def test_unknown_key_is_rejected_with_position():
    with pytest.raises(ScenarioParseError, match="unknown key") as exc:
        parse_scenario_text("[run]\nbogus = 1\n")
    assert exc.value.line == 2
    assert exc.value.col == 1


def test_unknown_section_is_rejected():
    with pytest.raises(ScenarioParseError, match="unknown section"):
        parse_scenario_text("[nonsense]\n")


def test_key_outside_section_is_rejected():
    with pytest.raises(ScenarioParseError, match="outside"):
        parse_scenario_text("seed = 1\n")


def test_unparseable_value_reports_kind():
    with pytest.raises(ScenarioParseError, match="cannot parse int"):
        parse_scenario_text("[run]\nseed = banana\n")


def test_garbage_line_is_rejected():
    with pytest.raises(ScenarioParseError, match="key = value"):
        parse_scenario_text("[run]\nwhat even is this\n")


def test_lambda_constant_and_cycle_are_exclusive():
    text = "[traffic]\nurllc_lambda = 5\nurllc_lambda_values = 1,2\n"
    with pytest.raises(ScenarioSemanticError, match="not both"):
        parse_scenario_text(text)


def test_lambda_schedule_cycles_with_dwell():
    sched = LambdaSchedule(values=(1.0, 2.0, 3.0), dwell=2)
    assert [sched.at(t) for t in range(8)] == [1, 1, 2, 2, 3, 3, 1, 1]


def test_load_is_pure_and_repeatable(tmp_path):
    p = tmp_path / "s.cfg"
    p.write_text("[users]\nembb = 3\nurllc = 2\n[run]\nseed = 9\n")
    a = load_scenario(p)
    b = load_scenario(p)
    assert a == b
    assert a.hash == b.hash


def test_hash_tracks_effective_configuration():
    a = Scenario()
    b = Scenario().with_lambda(125.0)
    c = Scenario().with_seed(2)
    assert a.hash != b.hash
    assert a.hash != c.hash
    assert a.hash == Scenario().hash


def test_snr_list_must_match_user_count():
    with pytest.raises(ScenarioSemanticError, match="per user"):
        parse_scenario_text("[users]\nembb = 3\nembb_mean_snr_db = 1.0,2.0\n")


def test_scalar_snr_is_broadcast():
    s = parse_scenario_text("[users]\nembb = 3\nembb_mean_snr_db = 9.0\n")
    assert s.embb_snrs() == (9.0, 9.0, 9.0)


def test_default_snrs_are_staggered_spans():
    s = Scenario()
    embb = s.embb_snrs()
    urllc = s.urllc_snrs()
    assert len(embb) == 10 and len(urllc) == 10
    assert embb[0] == 8.0 and embb[-1] == 13.0
    assert urllc[0] == 0.0 and urllc[-1] == 4.0
    assert all(b > a for a, b in zip(embb, embb[1:]))


def test_users_are_ordered_embb_then_urllc():
    s = Scenario(n_embb=2, n_urllc=2)
    users = s.users()
    assert [u.id for u in users] == [0, 1, 2, 3]
    assert [u.service.value for u in users] == ["embb", "embb", "urllc", "urllc"]


def test_semantic_errors_from_run_section():
    with pytest.raises(ScenarioSemanticError, match="horizon"):
        parse_scenario_text("[run]\nhorizon_slots = 0\n")
    with pytest.raises(ScenarioSemanticError, match="urllc_fraction"):
        parse_scenario_text("[run]\nurllc_fraction = 1.5\n")


def test_bad_enum_values_report_choices():
    with pytest.raises(ScenarioSemanticError, match="rayleigh|rician"):
        parse_scenario_text("[channel]\nfading = nakagami\n")
    with pytest.raises(ScenarioSemanticError, match="minimal"):
        parse_scenario_text("[twin]\ndelay = huge\n")


def test_shipped_scenarios_load(repo_root_scenarios):
    default = load_scenario(repo_root_scenarios / "default.cfg")
    assert default.horizon_slots == 5000
    assert default.lambda_schedule.values == (100.0, 125.0, 150.0, 175.0, 200.0)
    tiny = load_scenario(repo_root_scenarios / "tiny.cfg")
    assert tiny.n_embb + tiny.n_urllc == 3
    assert tiny.num_rbs == 4
