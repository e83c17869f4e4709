"""Tests for the rule engine, including mutations of the two-desk corpus model."""

import json
from collections import Counter

from hypothesis import given, settings

from conftest import irvo_models, oracle_paths, oracle_walk, parse_ok
from services.dsl_parser import load_model
from services.irvo_model import EntityKind, RelationKind, TaskIntent
from services.validator import IrvoValidator, Severity

validator = IrvoValidator()


def rules(findings):
    return [(f.rule, f.severity) for f in findings]


SINGLE_DESK = """
model "single desk" {
  place desk
  user alice @desk
  tool pen real @desk mobility alice/free
  object paper real @desk
  rel alice.KH -> pen action
  rel pen -> paper action channel KH
  rel pen -> alice.V perception
  rel paper -> alice.V perception
}
"""


def test_doubledesk_passes(ddd_model):
    report = validator.check(ddd_model)
    assert report.summary == {"errors": 0, "warnings": 0, "infos": 0}
    assert report.notes


def test_deleting_remote_camera_blinds_alice(ddd_text):
    text = ddd_text.replace("  sensor camera_b channel V @desk_b mobility pinned\n", "")
    text = text.replace("  rel paper_b -> video_b action via camera_b\n", "")
    report = validator.check(parse_ok(text))
    assert rules(report.findings) == [("R5", Severity.WARNING)]
    assert report.findings[0].nodes == ["sheet_b", "alice"]


def test_deleting_local_perception_breaks_alices_loop(ddd_text):
    # ma merges that perception, so it has to go as well
    text = ddd_text.replace("  rel paper_a -> alice.V perception\n", "")
    text = text.replace("  merge ma { paper_a, video_b } -> alice.V\n", "")
    report = validator.check(parse_ok(text))
    assert rules(report.findings) == [("R1", Severity.ERROR), ("R4", Severity.WARNING)]
    assert report.findings[0].nodes == ["alice"]
    assert "no action-perception loop" in report.findings[0].message
    assert report.findings[1].nodes == ["sheet_a", "paper_a", "alice"]
    assert report.summary == {"errors": 1, "warnings": 1, "infos": 0}


def test_projector_crossed_from_real_world(ddd_text):
    text = ddd_text.replace("rel paper_a -> video_a action via camera_a", "rel paper_a -> video_a action via projector_a")
    report = validator.check(parse_ok(text))
    assert rules(report.findings) == [("S3", Severity.ERROR)]
    assert report.findings[0].nodes == ["rel-5", "projector_a"]


def test_reversed_sensor_fixture(corpus_dir):
    report = validator.check(load_model(corpus_dir / "reversed_sensor.irvo"))
    assert [f.rule for f in report.findings if f.severity == Severity.ERROR] == ["S3"]


def test_loop_present():
    assert validator.rule_loop(parse_ok(SINGLE_DESK)) == []


def test_loop_missing_perception_leg():
    text = SINGLE_DESK.replace("  rel paper -> alice.V perception\n", "")
    findings = validator.rule_loop(parse_ok(text))
    assert rules(findings) == [("R1", Severity.ERROR)]
    assert findings[0].nodes == ["alice"]


def test_dashed_only_loop_gets_hint():
    text = SINGLE_DESK.replace("rel paper -> alice.V perception", "rel paper -> alice.V perception dashed")
    [finding] = validator.rule_loop(parse_ok(text))
    assert "dashed" in finding.message
    assert finding.message.endswith("make the perception of the domain object salient")


def test_dashed_action_leg_hint_names_the_tool():
    text = SINGLE_DESK.replace("rel alice.KH -> pen action", "rel alice.KH -> pen action dashed")
    [finding] = validator.rule_loop(parse_ok(text))
    assert "dashed" in finding.message
    assert finding.message.endswith("make the action through the tool salient")


def test_dashed_hint_names_both_legs():
    text = SINGLE_DESK.replace("rel alice.KH -> pen action", "rel alice.KH -> pen action dashed")
    text = text.replace("rel paper -> alice.V perception", "rel paper -> alice.V perception dashed")
    [finding] = validator.rule_loop(parse_ok(text))
    assert "the action through the tool and the perception of the domain object" in finding.message


def test_perception_only_intent():
    model = parse_ok('model "m" { intent perception\n user u\n object poster real\n rel poster -> u.V perception }')
    assert validator.rule_loop(model) == []
    with_tool = parse_ok(
        'model "m" { intent perception\n user u\n tool pen real\n object poster real\n'
        ' rel poster -> u.V perception }'
    )
    assert [f.nodes for f in validator.rule_loop(with_tool)] == [["pen"]]


def test_mouse_feedback_is_info(corpus_dir):
    findings = validator.rule_observability(load_model(corpus_dir / "mouse_pointer.irvo"))
    assert rules(findings) == [("R2", Severity.INFO)]


def test_tool_without_feedback_warns():
    text = SINGLE_DESK.replace("  rel pen -> alice.V perception\n", "")
    assert rules(validator.rule_observability(parse_ok(text))) == [("R2", Severity.WARNING)]


def test_audio_notebook_needs_no_merge(corpus_dir):
    model = load_model(corpus_dir / "audio_notebook.irvo")
    assert validator.rule_continuity(model) == []
    assert validator.rule_observability(model) == []


def test_continuity_unperceived_member(ddd_text):
    text = ddd_text.replace("  merge ma { paper_a, video_b } -> alice.V\n", "")
    text = text.replace("  rel video_b -> alice.V perception via projector_a\n", "")
    findings = validator.rule_continuity(parse_ok(text))
    assert rules(findings) == [("R4", Severity.WARNING)]
    assert findings[0].nodes == ["sheet_a", "video_b", "alice"]


def test_continuity_requires_merge_on_shared_channel(ddd_text):
    text = ddd_text.replace("  merge ma { paper_a, video_b } -> alice.V\n", "")
    findings = validator.rule_continuity(parse_ok(text))
    assert rules(findings) == [("R4", Severity.WARNING)]
    assert "without a merge" in findings[0].message


def test_single_user_wysiwis_is_info():
    findings = validator.rule_wysiwis(parse_ok(SINGLE_DESK))
    assert rules(findings) == [("R5", Severity.INFO)]
    assert findings[0].nodes == []


def test_opaque_wall_blocks_direct_perception():
    text = """
    model "walls" {
      place a
      place b
      user alice @a
      object poster real @b
      rel poster -> alice.V perception
    }
    """
    findings = validator.rule_transducers(parse_ok(text))
    assert rules(findings) == [("S2", Severity.ERROR)]


def test_audio_and_mirror_boundaries():
    base = """
    model "walls" {{
      place a
      place b
      boundary a b {kind}
      user alice @a
      object radio real @b
      rel radio -> alice.{channel} perception
    }}
    """
    check = lambda kind, channel: rules(validator.rule_transducers(parse_ok(base.format(kind=kind, channel=channel))))
    assert check("audio", "A") == []
    assert check("audio", "V") == [("S2", Severity.ERROR)]
    assert check("mirror viewer a", "V") == []
    assert check("mirror viewer b", "V") == [("S2", Severity.ERROR)]


def test_crossing_without_transducer_and_channel_mismatch():
    text = """
    model "m" {
      user u
      object doc virtual
      effector speaker channel A
      rel doc -> u.V perception
      rel doc -> u.A perception dashed via speaker
      rel doc -> u.T perception via speaker
    }
    """
    findings = validator.rule_transducers(parse_ok(text))
    assert Counter(f.rule for f in findings) == Counter({"S2": 1, "S4": 1})


TRANSDUCER_CHAIN = """
model "chain" {{
  user u
  object doc virtual
  effector screen channel V
  sensor cam channel V
  effector screen2 channel V
  rel doc -> u.V perception via {via}
}}
"""


def test_crossing_through_three_transducers():
    findings = validator.rule_transducers(parse_ok(TRANSDUCER_CHAIN.format(via="screen, cam, screen2")))
    assert rules(findings) == [("S2", Severity.ERROR)]
    assert findings[0].nodes == ["rel-1", "screen", "cam", "screen2"]
    assert "3 transducers" in findings[0].message


def test_crossing_through_two_transducers_reported_once():
    findings = validator.rule_transducers(parse_ok(TRANSDUCER_CHAIN.format(via="screen, cam")))
    assert rules(findings) == [("S2", Severity.ERROR)]
    assert findings[0].nodes == ["rel-1", "u"]


def test_crossing_through_one_transducer_is_clean():
    assert validator.rule_transducers(parse_ok(TRANSDUCER_CHAIN.format(via="screen"))) == []


def test_virtual_entity_with_place():
    model = parse_ok('model "m" { place p\n object doc virtual @p }')
    assert rules(validator.rule_virtual_openness(model)) == [("S6", Severity.ERROR)]


def test_report_json_schema(ddd_model):
    document = json.loads(validator.check(ddd_model).to_json())
    assert document["schema"] == "irvo-lint/1"
    assert set(document) == {"schema", "model", "findings", "summary", "notes"}
    assert document["model"] == "DoubleDigitalDesk"


def test_threshold_filters_display_only(corpus_dir):
    report = validator.check(load_model(corpus_dir / "wimp_editor.irvo"))
    assert report.at_least(Severity.WARNING) == []
    assert json.loads(report.to_json(Severity.ERROR))["summary"]["infos"] == 3


@settings(max_examples=60, deadline=None)
@given(irvo_models())
def test_check_is_union_of_rules(model):
    report = validator.check(model)
    parts = []
    for rule in (
        validator.rule_world_placement, validator.rule_transducers, validator.rule_mixed_groups,
        validator.rule_virtual_openness, validator.rule_loop, validator.rule_observability,
        validator.rule_continuity, validator.rule_wysiwis,
    ):
        parts.extend(rule(model))
    assert Counter(f.model_dump_json() for f in report.findings) == Counter(f.model_dump_json() for f in parts)
    assert report.findings == sorted(report.findings, key=lambda f: f.sort_key())
    assert validator.check(model).to_json() == report.to_json()


@settings(max_examples=1000, deadline=None)
@given(irvo_models(max_users=3))
def test_wysiwis_matches_path_oracle(model):
    users = model.users()
    warned = {tuple(f.nodes) for f in validator.rule_wysiwis(model) if f.severity == Severity.WARNING}
    if len(users) < 2:
        assert warned == set()
        return
    for obj in model.entities_of(EntityKind.OBJECT):
        group = model.group_of(obj.id)
        unit = group or obj.id
        members = model.entity(group).members if group else [obj.id]
        for user in users:
            blind = not oracle_paths(model, members, user)
            assert ((unit, user) in warned) == blind


@settings(max_examples=60, deadline=None)
@given(irvo_models())
def test_dashed_relations_do_not_carry_loops(model):
    if model.intent != TaskIntent.MANIPULATION:
        return
    before = {tuple(f.nodes) for f in validator.rule_loop(model)}
    salient = model.model_copy(deep=True)
    salient.relations = [r for r in salient.relations if r.salient]
    salient.merges = [
        m for m in salient.merges
        if all(any(r.kind == RelationKind.PERCEPTION and r.source.entity == p.entity and r.target == m.output
                   for r in salient.relations) for p in m.inputs)
    ]
    assert {tuple(f.nodes) for f in validator.rule_loop(salient)} == before


@settings(max_examples=1000, deadline=None)
@given(irvo_models(max_users=3))
def test_loop_matches_path_oracle(model):
    flagged = {tuple(f.nodes) for f in validator.rule_loop(model)}
    objects = [obj.id for obj in model.entities_of(EntityKind.OBJECT)]
    tools = [tool.id for tool in model.entities_of(EntityKind.TOOL)]
    for user in model.users():
        perceived = [obj for obj in objects if oracle_walk(model, [obj], user, salient_only=True)]
        if model.intent == TaskIntent.PERCEPTION_ONLY:
            closed = bool(perceived)
        else:
            handled = sorted({
                r.target.entity for r in model.relations
                if r.kind == RelationKind.ACTION and r.salient
                and r.source.entity == user and r.target.entity in tools
            })
            closed = any(oracle_walk(model, handled, obj, salient_only=True) for obj in perceived)
        assert ((user,) in flagged) == (not closed)
    if model.intent == TaskIntent.PERCEPTION_ONLY:
        assert {(tool,) for tool in tools} <= flagged
