"""Shared fixtures and hypothesis strategies for the irvo test-suite."""

from pathlib import Path
from typing import Dict, List, Set, Tuple

import hypothesis.strategies as st
import pytest

from services.dsl_parser import IrvoParser, load_model
from services.irvo_model import (
    BoundaryKind,
    Channel,
    Entity,
    EntityKind,
    IrvoModel,
    Mobility,
    MobilityKind,
    Port,
    RelationKind,
    TaskIntent,
    World,
    dependency_order,
)
from utils.errors import IrvoError

CORPUS = Path(__file__).parent / "corpus"


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS


@pytest.fixture
def parser() -> IrvoParser:
    return IrvoParser()


@pytest.fixture
def ddd_text() -> str:
    return (CORPUS / "doubledesk.irvo").read_text(encoding="utf-8")


@pytest.fixture
def ddd_model() -> IrvoModel:
    return load_model(CORPUS / "doubledesk.irvo")


def parse_ok(text: str) -> IrvoModel:
    result = IrvoParser().parse(text)
    assert result.ok, [str(d) for d in result.diagnostics]
    return result.model


def _oracle_adjacency(model: IrvoModel, salient_only: bool) -> Dict[str, Set[str]]:
    adjacency: Dict[str, Set[str]] = {}
    for relation in model.relations:
        if relation.kind == RelationKind.COMMUNICATION:
            continue
        if salient_only and not relation.salient:
            continue
        hops = model.hops(relation)
        for head, tail in zip(hops, hops[1:]):
            adjacency.setdefault(head, set()).add(tail)
    return adjacency


def oracle_paths(
    model: IrvoModel, sources: List[str], user: str, salient_only: bool = False
) -> Set[Tuple[str, ...]]:
    """Brute-force DFS over relation hops; independent of networkx."""
    return oracle_walk(model, sources, user, salient_only)


def oracle_walk(
    model: IrvoModel, sources: List[str], target: str, salient_only: bool = False
) -> Set[Tuple[str, ...]]:
    """Simple hop paths from any source to `target` that pass through no user but the target."""
    adjacency = _oracle_adjacency(model, salient_only)
    blocked = set(model.users()) - {target}
    found: Set[Tuple[str, ...]] = set()

    def dfs(path: List[str]) -> None:
        node = path[-1]
        if node == target:
            found.add(tuple(path))
            return
        for nxt in sorted(adjacency.get(node, ())):
            if nxt in path or nxt in blocked:
                continue
            dfs(path + [nxt])

    for source in sources:
        if source not in blocked:
            dfs([source])
    return found


# ----------------------------------------------------------------------
# hypothesis strategies

PLACE_IDS = ["p1", "p2", "p3"]


@st.composite
def irvo_models(draw, max_entities: int = 8, max_users: int = 2) -> IrvoModel:
    """Random models built through the checked operations; invalid attempts are skipped."""
    model = IrvoModel(name=draw(st.sampled_from(["m", "two words", 'say "hi"', "ünïcode"])))
    model.intent = draw(st.sampled_from(list(TaskIntent)))

    places = draw(st.lists(st.sampled_from(PLACE_IDS), unique=True, max_size=3))
    for place in places:
        model.add_place(place)
    if len(places) >= 2 and draw(st.booleans()):
        kind = draw(st.sampled_from(list(BoundaryKind)))
        model.add_boundary(places[0], places[1], kind, places[1] if kind == BoundaryKind.MIRROR else None)

    place_choice = st.one_of(st.none(), st.sampled_from(places)) if places else st.none()
    users = [f"u{i}" for i in range(draw(st.integers(1, max_users)))]
    for user in users:
        model.add_entity(Entity(id=user, kind=EntityKind.USER, place=draw(place_choice)))

    for index in range(draw(st.integers(1, max_entities))):
        kind = draw(st.sampled_from([EntityKind.TOOL, EntityKind.OBJECT, EntityKind.SENSOR, EntityKind.EFFECTOR]))
        prefix = {EntityKind.TOOL: "t", EntityKind.OBJECT: "o", EntityKind.SENSOR: "s", EntityKind.EFFECTOR: "e"}
        world = draw(st.sampled_from([World.REAL, World.VIRTUAL])) if kind in (EntityKind.TOOL, EntityKind.OBJECT) else None
        mobility = draw(st.sampled_from([
            Mobility(),
            Mobility(kind=MobilityKind.MOBILE),
            Mobility(kind=MobilityKind.ALWAYS_FIXED),
            Mobility(reference=users[0], kind=MobilityKind.MOBILE),
        ]))
        entity = Entity(
            id=f"{prefix[kind]}{index}",
            kind=kind,
            world=world,
            place=draw(place_choice) if world != World.VIRTUAL else None,
            mobility=mobility,
            stack=draw(st.booleans()) if world is not None else False,
            channel=draw(st.sampled_from(list(Channel))) if world is None else None,
        )
        model.add_entity(entity)

    endpoints = [e.id for e in model.sorted_entities() if not e.is_transducer]
    transducers = [e.id for e in model.entities_of(EntityKind.SENSOR, EntityKind.EFFECTOR)]
    channel_choice = st.sampled_from(list(Channel))
    for _ in range(draw(st.integers(0, 12))):
        source = draw(st.sampled_from(endpoints))
        target = draw(st.sampled_from(endpoints))
        source_port = Port(entity=source, channel=draw(channel_choice) if source in users else None)
        target_port = Port(entity=target, channel=draw(channel_choice) if target in users else None)
        via = draw(st.lists(st.sampled_from(transducers), unique=True, max_size=2)) if transducers else []
        kind = draw(st.sampled_from(list(RelationKind)))
        if any(
            r.source == source_port and r.target == target_port and r.kind == kind for r in model.relations
        ):
            continue
        try:
            model.add_relation(
                source_port,
                target_port,
                kind,
                salient=draw(st.booleans()),
                channel=draw(st.one_of(st.none(), channel_choice)),
                via=via,
                annotation=draw(st.one_of(st.none(), st.sampled_from(["note", "a \"quoted\" note"]))),
            )
        except IrvoError:
            pass

    artifacts = [e.id for e in model.sorted_entities() if e.is_artifact]
    if len(artifacts) >= 2 and draw(st.booleans()):
        members = draw(st.lists(st.sampled_from(artifacts), unique=True, min_size=2, max_size=3))
        try:
            model.compose_mixed("g0", members)
        except IrvoError:
            pass

    perceptions = [r for r in model.relations if r.kind == RelationKind.PERCEPTION]
    if perceptions and draw(st.booleans()):
        output = draw(st.sampled_from(perceptions)).target
        sources = sorted({r.source.entity for r in perceptions if r.target == output})
        try:
            model.add_merge("mx", [Port(entity=s) for s in sources], output)
        except IrvoError:
            pass
    return model


def restrict(model: IrvoModel, keep: Set[int], name: str) -> IrvoModel:
    """Same entities, a subset of relations; merges kept only when still fed."""
    result = IrvoModel(name=name, intent=model.intent)
    for place in sorted(model.places):
        result.add_place(place)
    for boundary in model.boundaries:
        result.add_boundary(boundary.a, boundary.b, boundary.kind, boundary.viewer)
    for entity in dependency_order(model.entities.values()):
        if entity.kind == EntityKind.MIXED:
            result.compose_mixed(entity.id, entity.members)
        else:
            result.add_entity(entity)
    for index, relation in enumerate(model.relations):
        if index in keep:
            result.add_relation(
                relation.source, relation.target, relation.kind, salient=relation.salient,
                channel=relation.channel, via=relation.via, annotation=relation.annotation,
            )
    for merge in model.merges:
        try:
            result.add_merge(merge.id, merge.inputs, merge.output)
        except IrvoError:
            pass
    return result


@st.composite
def model_families(draw, size: int = 3) -> List[IrvoModel]:
    """Models sharing identifiers and attributes, differing in their relations."""
    base = draw(irvo_models())
    indices = list(range(len(base.relations)))
    family = []
    for member in range(size):
        keep = set(draw(st.lists(st.sampled_from(indices), unique=True))) if indices else set()
        family.append(restrict(base, keep, f"part{member}"))
    return family
