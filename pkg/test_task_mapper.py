"""Tests for task trees, diagram merging and root synthesis."""

import json

import pytest
from hypothesis import given, settings

from conftest import model_families, parse_ok
from services.dsl_parser import to_json
from services.irvo_model import structurally_equal
from services.task_mapper import ModelMerger, TaskMapper, TaskNode, TaskTree, load_tree, merge_models
from utils.errors import (
    AttributeConflict,
    ConflictingDescendantLink,
    IncompatibleIntent,
    InvalidTaskTree,
    TaskAlreadyLinked,
    UncoveredLeaf,
    UnknownTask,
)

PEN_ON_PAPER = """
model "pen" {
  user alice
  tool pen real
  object paper real
  rel alice.KH -> pen action
  rel pen -> paper action channel KH
  rel paper -> alice.V perception
}
"""


@pytest.fixture
def office(corpus_dir):
    return load_tree(corpus_dir / "office_tasks" / "office_work.json")


def tree_of(shape) -> TaskTree:
    """Build a tree from nested (id, [children]) tuples."""
    def node(item):
        task_id, children = item
        return TaskNode(id=task_id, children=[node(child) for child in children])

    return TaskTree(root=node(shape))


def test_tree_navigation(office):
    tree, _ = office
    assert tree.ancestors("t21") == ["t2", "office_work"]
    assert tree.descendants("t1") == ["t11", "t12", "t13"]
    assert tree.leaves() == ["t11", "t12", "t13", "t21", "t22"]
    assert tree.find("t2").operator == ">>"


def test_duplicate_task_ids_rejected():
    with pytest.raises(InvalidTaskTree):
        tree_of(("root", [("a", []), ("a", [])]))


def test_link_conflicts(office):
    tree, links = office
    mapper = TaskMapper()
    model = parse_ok(PEN_ON_PAPER)
    with pytest.raises(ConflictingDescendantLink):
        mapper.link(tree, links, "t21", model)
    with pytest.raises(ConflictingDescendantLink):
        mapper.link(tree, links, "t1", model)
    with pytest.raises(TaskAlreadyLinked):
        mapper.link(tree, links, "t11", model)
    with pytest.raises(UnknownTask):
        mapper.link(tree, links, "t99", model)


def test_link_returns_new_mapping(office):
    tree, links = office
    without = {k: v for k, v in links.items() if k != "t13"}
    relinked = TaskMapper().link(tree, without, "t13", links["t13"])
    assert "t13" in relinked and "t13" not in without


def test_office_synthesis(office):
    tree, links = office
    mapper = TaskMapper()
    synthesized = mapper.synthesize(tree, links)
    assert set(synthesized) == {"office_work", "t1", "t11", "t12", "t13", "t2"}
    root = synthesized["office_work"]
    assert root.name == "office_work"
    assert {"pencil", "eraser", "drawing", "notes", "stapler", "folder"} <= set(root.entities)
    assert mapper.notes == []


def test_single_linked_leaf_is_the_root():
    model = parse_ok(PEN_ON_PAPER)
    tree = tree_of(("only", []))
    assert TaskMapper().synthesize(tree, {"only": model}) == {"only": model}


def test_uncovered_leaf(office):
    tree, links = office
    del links["t13"]
    with pytest.raises(UncoveredLeaf) as caught:
        TaskMapper().synthesize(tree, links)
    assert caught.value.subject == "t13"


def test_world_conflict():
    first = parse_ok('model "a" { user alice\n tool pen real }')
    second = parse_ok('model "b" { user alice\n tool pen virtual }')
    with pytest.raises(AttributeConflict) as caught:
        merge_models([first, second])
    assert caught.value.attribute == "world"
    assert caught.value.subject == "pen"
    assert "real vs virtual" in str(caught.value)


def test_intent_conflict():
    first = parse_ok('model "a" { user alice }')
    second = parse_ok('model "b" { intent perception\n user alice }')
    with pytest.raises(IncompatibleIntent):
        merge_models([first, second])


def test_unspecified_attributes_take_the_specified_value():
    first = parse_ok('model "a" { place desk\n user alice\n tool pen real }')
    second = parse_ok('model "b" { place desk\n user alice\n tool pen real @desk mobility alice/free }')
    merged = merge_models([first, second])
    assert merged.entity("pen").place == "desk"
    assert merged.entity("pen").mobility.reference == "alice"


def test_salient_wins_with_note():
    dashed = PEN_ON_PAPER.replace("rel paper -> alice.V perception", "rel paper -> alice.V perception dashed")
    outcome = ModelMerger().merge([parse_ok(PEN_ON_PAPER), parse_ok(dashed)])
    assert all(r.salient for r in outcome.model.relations)
    assert len(outcome.notes) == 1
    assert "kept salient" in outcome.notes[0]


def test_via_conflict():
    base = 'model "m" {{ user alice\n object doc virtual\n effector {a} channel V\n effector {b} channel V\n'
    first = parse_ok(base.format(a="screen", b="beamer") + " rel doc -> alice.V perception via screen }")
    second = parse_ok(base.format(a="screen", b="beamer") + " rel doc -> alice.V perception via beamer }")
    with pytest.raises(AttributeConflict) as caught:
        merge_models([first, second])
    assert caught.value.attribute == "via"


def test_factor_links_shared_children(office):
    tree, links = office
    file_papers = links.pop("t2")
    links.update(t21=file_papers, t22=file_papers)
    factored = TaskMapper().factor_links(tree, links)
    assert "t2" in factored
    assert "t21" not in factored and "t22" not in factored
    assert {"t11", "t12", "t13"} <= set(factored)


def test_factor_links_to_fixpoint():
    model = parse_ok(PEN_ON_PAPER)
    tree = tree_of(("r", [("x", [("a", []), ("b", [])]), ("y", [("c", []), ("d", [])])]))
    links = {task: model for task in ("a", "b", "c", "d")}
    mapper = TaskMapper()
    factored = mapper.factor_links(tree, links)
    assert list(factored) == ["r"]
    assert structurally_equal(
        mapper.synthesize(tree, factored)["r"], mapper.synthesize(tree, links)["r"]
    )


def test_odd_configuration_in_office(office):
    tree, links = office
    mapper = TaskMapper()
    root = mapper.synthesize(tree, links)[tree.root.id]
    [finding] = mapper.odd_configurations(root, links)
    assert finding.rule == "ODD"
    assert finding.nodes == ["folder", "stapler"]
    assert "'t2'" in finding.message


def test_no_odd_configuration_when_connected(office):
    tree, links = office
    links = {task: model for task, model in links.items() if task != "t2"}
    links["t2"] = links["t11"]
    root = TaskMapper().synthesize(tree, links)[tree.root.id]
    assert TaskMapper().odd_configurations(root, links) == []


def test_tree_aliases_and_inline_links(tmp_path):
    (tmp_path / "draw.irvo").write_text(PEN_ON_PAPER.replace("pen", "stylus"), encoding="utf-8")
    document = {
        "schema": "irvo-tree/1",
        "aliases": {"stylus": "pen"},
        "root": {
            "id": "write",
            "children": [
                {"id": "draw", "link": "draw.irvo"},
                {"id": "ink", "link": json.loads(to_json(parse_ok(PEN_ON_PAPER)))},
            ],
        },
    }
    path = tmp_path / "tree.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    tree, links = load_tree(path)
    assert "pen" in links["draw"].entities and "stylus" not in links["draw"].entities
    assert structurally_equal(links["draw"], links["ink"])
    root = TaskMapper().synthesize(tree, links)["write"]
    assert len(root.relations) == 3


def test_tree_rejects_other_schema(tmp_path):
    path = tmp_path / "tree.json"
    path.write_text(json.dumps({"schema": "irvo-tree/9", "root": {"id": "r"}}), encoding="utf-8")
    with pytest.raises(InvalidTaskTree):
        load_tree(path)


@settings(max_examples=100, deadline=None)
@given(model_families())
def test_merge_is_idempotent_commutative_associative(family):
    a, b, c = family
    assert structurally_equal(merge_models([a, a]), a)
    assert structurally_equal(merge_models([a, b]), merge_models([b, a]))
    left = merge_models([merge_models([a, b]), c])
    right = merge_models([a, merge_models([b, c])])
    assert structurally_equal(left, right)
    assert structurally_equal(left, merge_models([a, b, c]))
