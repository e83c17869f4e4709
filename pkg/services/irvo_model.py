"""
IRVO model graph: users, real/virtual tools and objects, the internal model,
transducers, places and the relations between them.

Construction goes through the add_* operations, which check every invariant
before touching the model, so a failed add leaves it unchanged.
"""

import json
import logging
import re
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Set, Tuple

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field

from utils.errors import (
    ActionNotFromUser,
    AllSameWorld,
    ChannelMismatch,
    ChannelUnresolvable,
    CommunicationNotUserToUser,
    DuplicateId,
    InvalidAttribute,
    InvalidBoundary,
    InvalidEndpoint,
    InvalidIdentifier,
    InvalidMember,
    MemberAlreadyGrouped,
    MergeInputNotPerceived,
    MissingWorldTag,
    ModelInRealWorld,
    OutputNotUser,
    PerceptionNotIntoUser,
    PortChannelError,
    ReferenceCycle,
    TooFewInputs,
    TooFewMembers,
    TransducerWorld,
    UnknownEndpoint,
    UnknownEntity,
    UnknownPlace,
    UserInVirtualWorld,
)

logger = logging.getLogger(__name__)

IDENTIFIER_PATTERN = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

# Keywords of the .irvo text format; they cannot be used as identifiers.
RESERVED_WORDS = frozenset({
    "model", "place", "boundary", "opaque", "audio", "mirror", "viewer",
    "user", "tool", "object", "internal", "sensor", "effector",
    "real", "virtual", "channel", "mobility", "free", "fixed", "pinned",
    "stack", "in", "rel", "action", "perception", "communication",
    "dashed", "via", "mixed", "merge", "intent", "manipulation",
})


class Channel(str, Enum):
    V = "V"
    A = "A"
    KH = "KH"
    T = "T"
    S = "S"


class World(str, Enum):
    REAL = "real"
    VIRTUAL = "virtual"
    STRADDLING = "straddling"


class EntityKind(str, Enum):
    USER = "user"
    TOOL = "tool"
    OBJECT = "object"
    INTERNAL = "internal"
    SENSOR = "sensor"
    EFFECTOR = "effector"
    MIXED = "mixed"


ENTITY_KIND_ORDER = list(EntityKind)
TRANSDUCER_KINDS = (EntityKind.SENSOR, EntityKind.EFFECTOR)
ARTIFACT_KINDS = (EntityKind.TOOL, EntityKind.OBJECT)


class BoundaryKind(str, Enum):
    OPAQUE = "opaque"
    AUDIO = "audio"
    MIRROR = "mirror"


class MobilityKind(str, Enum):
    MOBILE = "free"
    TASK_FIXED = "fixed"
    ALWAYS_FIXED = "pinned"
    UNSPECIFIED = "unspecified"

    @property
    def glyph(self) -> str:
        return {"free": "↔", "fixed": "×", "pinned": "⊗"}.get(self.value, "")


class RelationKind(str, Enum):
    ACTION = "action"
    PERCEPTION = "perception"
    COMMUNICATION = "communication"


class TaskIntent(str, Enum):
    MANIPULATION = "manipulation"
    PERCEPTION_ONLY = "perception"


class PlaceBoundary(BaseModel):
    """Wall between two real-world places; `a` sorts before `b`."""

    model_config = ConfigDict(frozen=True)

    a: str
    b: str
    kind: BoundaryKind
    viewer: Optional[str] = None

    def separates(self, p: str, q: str) -> bool:
        return {p, q} == {self.a, self.b}


class Mobility(BaseModel):
    """Mobility annotation; `reference` None means relative to the world."""

    model_config = ConfigDict(frozen=True)

    reference: Optional[str] = None
    kind: MobilityKind = MobilityKind.UNSPECIFIED

    def label(self) -> str:
        if self.kind == MobilityKind.UNSPECIFIED:
            return ""
        prefix = f"{self.reference} " if self.reference else ""
        return f"{prefix}{self.kind.glyph}"


class Entity(BaseModel):
    id: str
    kind: EntityKind
    world: Optional[World] = None
    place: Optional[str] = None
    mobility: Mobility = Field(default_factory=Mobility)
    nested_in: Optional[str] = None
    stack: bool = False
    channel: Optional[Channel] = None
    members: List[str] = Field(default_factory=list)

    @property
    def is_transducer(self) -> bool:
        return self.kind in TRANSDUCER_KINDS

    @property
    def is_artifact(self) -> bool:
        return self.kind in ARTIFACT_KINDS

    @property
    def tag(self) -> str:
        """Diagram tag such as U, Tr, Ov, M."""
        if self.kind == EntityKind.USER:
            return "U"
        if self.kind == EntityKind.INTERNAL:
            return "M"
        if self.is_artifact:
            prefix = "T" if self.kind == EntityKind.TOOL else "O"
            return prefix + ("r" if self.world == World.REAL else "v")
        if self.is_transducer:
            return ("S" if self.kind == EntityKind.SENSOR else "E") + f":{self.channel.value}"
        return "Mixed"


class Port(BaseModel):
    model_config = ConfigDict(frozen=True)

    entity: str
    channel: Optional[Channel] = None

    def __str__(self) -> str:
        if self.channel is None:
            return self.entity
        return f"{self.entity}.{self.channel.value}"


class Relation(BaseModel):
    id: str
    source: Port
    target: Port
    kind: RelationKind
    salient: bool = True
    channel: Channel
    via: List[str] = Field(default_factory=list)
    annotation: Optional[str] = None


class MergeNode(BaseModel):
    id: str
    inputs: List[Port]
    output: Port

    @property
    def channel(self) -> Channel:
        return self.output.channel

    def input_entities(self) -> Set[str]:
        return {port.entity for port in self.inputs}


class IrvoModel(BaseModel):
    """A named IRVO interaction model for one task."""

    name: str
    intent: TaskIntent = TaskIntent.MANIPULATION
    places: Set[str] = Field(default_factory=set)
    boundaries: List[PlaceBoundary] = Field(default_factory=list)
    entities: Dict[str, Entity] = Field(default_factory=dict)
    relations: List[Relation] = Field(default_factory=list)
    merges: List[MergeNode] = Field(default_factory=list)

    # ------------------------------------------------------------------
    # construction

    def add_place(self, place_id: str) -> str:
        _check_identifier(place_id)
        if place_id in self.places:
            raise DuplicateId(f"place '{place_id}' already declared", place_id)
        self.places.add(place_id)
        return place_id

    def add_boundary(
        self,
        a: str,
        b: str,
        kind: BoundaryKind,
        viewer: Optional[str] = None,
    ) -> PlaceBoundary:
        if a == b:
            raise InvalidBoundary(f"boundary needs two distinct places, got '{a}' twice", b)
        for place in (a, b):
            if place not in self.places:
                raise UnknownPlace(f"unknown place '{place}'", place)
        if self.boundary_between(a, b) is not None:
            raise InvalidBoundary(f"places '{a}' and '{b}' already have a boundary", b)
        if kind == BoundaryKind.MIRROR:
            if viewer not in (a, b):
                raise InvalidBoundary(f"mirror viewer must be '{a}' or '{b}'", viewer)
        elif viewer is not None:
            raise InvalidBoundary(f"only mirror boundaries have a viewer", viewer)
        first, second = sorted((a, b))
        boundary = PlaceBoundary(a=first, b=second, kind=kind, viewer=viewer)
        self.boundaries.append(boundary)
        self.boundaries.sort(key=lambda item: (item.a, item.b))
        return boundary

    def add_entity(self, entity: Entity) -> str:
        self._check_fresh(entity.id)
        if entity.kind == EntityKind.MIXED:
            raise InvalidAttribute("mixed groups are created with compose_mixed", entity.id)
        world = _resolve_world(entity)

        if entity.place is not None:
            if entity.kind == EntityKind.INTERNAL:
                raise InvalidAttribute(f"internal model '{entity.id}' cannot have a place", entity.place)
            if entity.place not in self.places:
                raise UnknownPlace(f"unknown place '{entity.place}'", entity.place)

        if entity.stack and not entity.is_artifact:
            raise InvalidAttribute(f"only tools and objects can be stacks, not {entity.kind.value}", entity.id)

        if entity.is_transducer and entity.channel is None:
            raise PortChannelError(f"{entity.kind.value} '{entity.id}' needs a channel", entity.id)
        if not entity.is_transducer and entity.channel is not None:
            raise PortChannelError(f"{entity.kind.value} '{entity.id}' cannot declare a channel", entity.id)

        if entity.nested_in is not None:
            if not entity.is_artifact:
                raise InvalidAttribute(f"{entity.kind.value} '{entity.id}' cannot be nested", entity.id)
            host = self.entities.get(entity.nested_in)
            if host is None:
                raise UnknownEntity(f"unknown embedding entity '{entity.nested_in}'", entity.nested_in)
            if not host.is_artifact:
                raise InvalidAttribute(f"'{entity.nested_in}' is a {host.kind.value} and cannot embed entities", entity.nested_in)

        mobility = entity.mobility
        if entity.kind == EntityKind.INTERNAL and mobility != Mobility():
            raise InvalidAttribute(f"internal model '{entity.id}' has no mobility", entity.id)
        if mobility.reference is not None:
            if mobility.reference == entity.id:
                raise InvalidAttribute(f"'{entity.id}' cannot move relative to itself", entity.id)
            if mobility.reference not in self.entities:
                raise UnknownEntity(f"unknown mobility reference '{mobility.reference}'", mobility.reference)
            if mobility.kind == MobilityKind.UNSPECIFIED:
                raise InvalidAttribute(f"relative mobility of '{entity.id}' needs a kind", mobility.reference)

        stored = entity.model_copy(update={"world": world, "members": []})
        self.entities[entity.id] = stored
        logger.debug(f"Added {entity.kind.value} '{entity.id}' to model '{self.name}'")
        return entity.id

    def compose_mixed(self, name: str, members: Iterable[str]) -> str:
        self._check_fresh(name)
        unique = sorted(set(members))
        if len(unique) < 2:
            raise TooFewMembers(f"mixed group '{name}' needs at least two members", name)
        worlds = set()
        for member_id in unique:
            member = self.entities.get(member_id)
            if member is None:
                raise UnknownEntity(f"unknown group member '{member_id}'", member_id)
            if not member.is_artifact:
                raise InvalidMember(f"'{member_id}' is a {member.kind.value}; only tools and objects can be grouped", member_id)
            owner = self.group_of(member_id)
            if owner is not None:
                raise MemberAlreadyGrouped(f"'{member_id}' already belongs to group '{owner}'", member_id)
            worlds.add(member.world)
        if len(worlds) < 2:
            raise AllSameWorld(f"mixed group '{name}' must combine real and virtual members", name)
        self.entities[name] = Entity(
            id=name, kind=EntityKind.MIXED, world=World.STRADDLING, members=unique
        )
        return name

    def add_relation(
        self,
        source: Port,
        target: Port,
        kind: RelationKind,
        salient: bool = True,
        channel: Optional[Channel] = None,
        via: Iterable[str] = (),
        annotation: Optional[str] = None,
    ) -> str:
        via = list(via)
        for port in (source, target):
            self._check_port(port)
        for position, transducer_id in enumerate(via):
            transducer = self.entities.get(transducer_id)
            if transducer is None:
                raise UnknownEndpoint(f"unknown transducer '{transducer_id}'", transducer_id)
            if not transducer.is_transducer:
                raise InvalidEndpoint(f"'{transducer_id}' is not a transducer", transducer_id)
            if transducer_id in via[:position]:
                raise InvalidEndpoint(f"transducer '{transducer_id}' traversed twice", transducer_id)

        source_is_user = self._is_user(source.entity)
        target_is_user = self._is_user(target.entity)
        if kind == RelationKind.PERCEPTION and not target_is_user:
            raise PerceptionNotIntoUser(f"perception must end at a user, not '{target.entity}'", target.entity)
        if kind == RelationKind.COMMUNICATION and not (source_is_user and target_is_user):
            culprit = target.entity if source_is_user else source.entity
            raise CommunicationNotUserToUser("communication links two users", culprit)
        if kind == RelationKind.ACTION and target_is_user and not source_is_user:
            raise ActionNotFromUser(f"action on user '{target.entity}' must come from a user", source.entity)

        declared = [port.channel for port in (source, target) if port.channel is not None]
        if channel is not None:
            declared.append(channel)
        if len(set(declared)) > 1:
            subject = source.entity if source.channel is not None else target.entity
            raise ChannelMismatch(
                "relation channels disagree: " + ", ".join(sorted({c.value for c in declared})), subject
            )
        if declared:
            effective = declared[0]
        elif via:
            effective = self.entities[via[0]].channel
        else:
            raise ChannelUnresolvable(
                f"cannot infer the channel of {source} -> {target}; declare one", target.entity
            )

        relation = Relation(
            id=f"rel-{len(self.relations) + 1}",
            source=source,
            target=target,
            kind=kind,
            salient=salient,
            channel=effective,
            via=via,
            annotation=annotation,
        )
        self.relations.append(relation)
        return relation.id

    def add_merge(self, merge_id: str, inputs: Iterable[Port], output: Port) -> str:
        self._check_fresh(merge_id)
        inputs = list(inputs)
        if len({port.entity for port in inputs}) < 2:
            raise TooFewInputs(f"merge '{merge_id}' needs two or more distinct inputs", merge_id)
        if output.entity not in self.entities:
            raise UnknownEndpoint(f"unknown merge output '{output.entity}'", output.entity)
        if not self._is_user(output.entity):
            raise OutputNotUser(f"merge output '{output.entity}' is not a user", output.entity)
        if output.channel is None:
            raise PortChannelError(f"merge output '{output.entity}' needs a channel", output.entity)

        for port in inputs:
            entity = self.entities.get(port.entity)
            if entity is None:
                raise UnknownEndpoint(f"unknown merge input '{port.entity}'", port.entity)
            if entity.kind in (EntityKind.USER, EntityKind.MIXED) or entity.is_transducer:
                raise InvalidEndpoint(f"'{port.entity}' ({entity.kind.value}) cannot feed a merge", port.entity)
        for port in inputs:
            if (port.channel or output.channel) != output.channel:
                raise ChannelMismatch(
                    f"merge input {port} does not match output channel {output.channel.value}", port.entity
                )
        for port in inputs:
            for other in self.merges:
                if other.output == output and port.entity in other.input_entities():
                    raise InvalidEndpoint(f"'{port.entity}' already feeds merge '{other.id}'", port.entity)
            if not any(
                relation.kind == RelationKind.PERCEPTION
                and relation.source.entity == port.entity
                and relation.target == output
                for relation in self.relations
            ):
                raise MergeInputNotPerceived(f"no perception relation {port.entity} -> {output}", port.entity)

        self.merges.append(MergeNode(id=merge_id, inputs=inputs, output=output))
        return merge_id

    # ------------------------------------------------------------------
    # queries

    def entity(self, entity_id: str) -> Entity:
        try:
            return self.entities[entity_id]
        except KeyError:
            raise UnknownEntity(f"unknown entity '{entity_id}'", entity_id) from None

    def world_of(self, entity_id: str) -> World:
        return self.entity(entity_id).world

    def entities_of(self, *kinds: EntityKind) -> List[Entity]:
        return sorted(
            (entity for entity in self.entities.values() if entity.kind in kinds),
            key=lambda entity: entity.id,
        )

    def users(self) -> List[str]:
        return [entity.id for entity in self.entities_of(EntityKind.USER)]

    def sorted_entities(self) -> List[Entity]:
        return sorted(
            self.entities.values(),
            key=lambda entity: (ENTITY_KIND_ORDER.index(entity.kind), entity.id),
        )

    def group_of(self, entity_id: str) -> Optional[str]:
        for entity in self.entities.values():
            if entity.kind == EntityKind.MIXED and entity_id in entity.members:
                return entity.id
        return None

    def effective_place(self, entity_id: str) -> Optional[str]:
        """Own place, else the place of the nearest embedding entity."""
        entity = self.entity(entity_id)
        while entity.place is None and entity.nested_in is not None:
            entity = self.entities[entity.nested_in]
        return entity.place

    def effective_mobility(self, entity_id: str) -> Mobility:
        entity = self.entity(entity_id)
        if entity.nested_in is not None and entity.mobility.kind == MobilityKind.UNSPECIFIED:
            return Mobility(reference=entity.nested_in, kind=MobilityKind.TASK_FIXED)
        return entity.mobility

    def boundary_between(self, p: str, q: str) -> Optional[PlaceBoundary]:
        for boundary in self.boundaries:
            if boundary.separates(p, q):
                return boundary
        return None

    def merge_for(self, relation: Relation) -> Optional[MergeNode]:
        """The merge node a perception relation converges through, if any."""
        if relation.kind != RelationKind.PERCEPTION:
            return None
        for merge in self.merges:
            if merge.output == relation.target and relation.source.entity in merge.input_entities():
                return merge
        return None

    def hops(self, relation: Relation) -> List[str]:
        nodes = [relation.source.entity, *relation.via]
        merge = self.merge_for(relation)
        if merge is not None:
            nodes.append(merge.id)
        nodes.append(relation.target.entity)
        return nodes

    def flow_graph(self, salient_only: bool = False) -> nx.DiGraph:
        """Directed graph of action and perception hops.

        Nodes are entity and merge ids; each edge records the ids of the
        relations that produced it.
        """
        graph = nx.DiGraph()
        for entity in self.entities.values():
            if entity.kind != EntityKind.MIXED:
                graph.add_node(entity.id, kind=entity.kind)
        for merge in self.merges:
            graph.add_node(merge.id, kind="merge")
        for relation in self.relations:
            if relation.kind == RelationKind.COMMUNICATION:
                continue
            if salient_only and not relation.salient:
                continue
            nodes = self.hops(relation)
            for head, tail in zip(nodes, nodes[1:]):
                if graph.has_edge(head, tail):
                    graph[head][tail]["relations"].add(relation.id)
                else:
                    graph.add_edge(head, tail, relations={relation.id})
        return graph

    def perception_paths(
        self,
        object_id: str,
        user_id: str,
        salient_only: bool = False,
        graph: Optional[nx.DiGraph] = None,
    ) -> Set[Tuple[str, ...]]:
        """Every simple flow path from the object (or any group member) to the user."""
        source = self.entity(object_id)
        user = self.entity(user_id)
        if user.kind != EntityKind.USER:
            raise InvalidEndpoint(f"'{user_id}' is not a user", user_id)
        if not (source.is_artifact or source.kind == EntityKind.MIXED):
            raise InvalidEndpoint(f"'{object_id}' is a {source.kind.value}, not a tool, object or group", object_id)

        if graph is None:
            graph = self.flow_graph(salient_only)
        other_users = {uid for uid in self.users() if uid != user_id}
        view = nx.restricted_view(graph, other_users, [])
        starts = source.members if source.kind == EntityKind.MIXED else [source.id]

        paths: Set[Tuple[str, ...]] = set()
        for start in starts:
            if start in view and user_id in view:
                for path in nx.all_simple_paths(view, start, user_id):
                    paths.add(tuple(path))
        return paths

    def canonical_key(self) -> Tuple:
        """Structural identity: ignores name, relation ids and relation order."""

        def dump(item: BaseModel, exclude: Optional[set] = None) -> str:
            return json.dumps(item.model_dump(mode="json", exclude=exclude), sort_keys=True)

        return (
            self.intent.value,
            tuple(sorted(self.places)),
            tuple(sorted(dump(boundary) for boundary in self.boundaries)),
            tuple(sorted(dump(entity) for entity in self.entities.values())),
            tuple(sorted(dump(relation, {"id"}) for relation in self.relations)),
            tuple(sorted(
                json.dumps([merge.id, sorted(str(p) for p in merge.inputs), str(merge.output)])
                for merge in self.merges
            )),
        )

    # ------------------------------------------------------------------
    # helpers

    def _check_fresh(self, node_id: str) -> None:
        _check_identifier(node_id)
        if node_id in self.entities or any(merge.id == node_id for merge in self.merges):
            raise DuplicateId(f"identifier '{node_id}' is already used", node_id)

    def _check_port(self, port: Port) -> None:
        entity = self.entities.get(port.entity)
        if entity is None:
            raise UnknownEndpoint(f"unknown endpoint '{port.entity}'", port.entity)
        if entity.is_transducer:
            raise InvalidEndpoint(f"transducer '{port.entity}' is crossed with 'via', not targeted", port.entity)
        if entity.kind == EntityKind.MIXED:
            raise InvalidEndpoint(f"group '{port.entity}' is addressed through its members", port.entity)
        if entity.kind == EntityKind.USER and port.channel is None:
            raise PortChannelError(f"user endpoint '{port.entity}' needs a channel", port.entity)
        if entity.kind == EntityKind.INTERNAL and port.channel is not None:
            raise PortChannelError(f"internal model '{port.entity}' has no channels", port.entity)

    def _is_user(self, entity_id: str) -> bool:
        return self.entities[entity_id].kind == EntityKind.USER


def _check_identifier(node_id: str) -> None:
    if not isinstance(node_id, str) or not IDENTIFIER_PATTERN.match(node_id):
        raise InvalidIdentifier(f"invalid identifier {node_id!r}", node_id)
    if node_id in RESERVED_WORDS:
        raise InvalidIdentifier(f"'{node_id}' is a reserved word", node_id)


def _resolve_world(entity: Entity) -> World:
    world = entity.world
    if entity.kind == EntityKind.USER:
        if world not in (None, World.REAL):
            raise UserInVirtualWorld(f"user '{entity.id}' must be in the real world", entity.id)
        return World.REAL
    if entity.kind == EntityKind.INTERNAL:
        if world not in (None, World.VIRTUAL):
            raise ModelInRealWorld(f"internal model '{entity.id}' must be in the virtual world", entity.id)
        return World.VIRTUAL
    if entity.is_transducer:
        if world not in (None, World.STRADDLING):
            raise TransducerWorld(f"transducer '{entity.id}' straddles the R/V boundary", entity.id)
        return World.STRADDLING
    if world is None:
        raise MissingWorldTag(f"{entity.kind.value} '{entity.id}' needs a real or virtual tag", entity.id)
    if world == World.STRADDLING:
        raise TransducerWorld(f"only transducers straddle the R/V boundary, not '{entity.id}'", entity.id)
    return world


def dependency_order(entities: Iterable[Entity]) -> List[Entity]:
    """Order entities so embedding, mobility and member references come first.

    Ties are broken by identifier; references to undeclared ids are ignored
    here and reported by add_entity.
    """
    entities = list(entities)
    by_id = {entity.id: entity for entity in entities}
    graph = nx.DiGraph()
    graph.add_nodes_from(by_id)
    for entity in entities:
        for dependency in (entity.nested_in, entity.mobility.reference, *entity.members):
            if dependency in by_id and dependency != entity.id:
                graph.add_edge(dependency, entity.id)
    try:
        order = list(nx.lexicographical_topological_sort(graph))
    except nx.NetworkXUnfeasible:
        cycle = [edge[0] for edge in nx.find_cycle(graph)]
        raise ReferenceCycle("cyclic references: " + " -> ".join(cycle), cycle[0]) from None
    return [by_id[entity_id] for entity_id in order]


def rebuild(
    model: IrvoModel,
    rename: Callable[[str], str] = lambda node_id: node_id,
    name: Optional[str] = None,
) -> IrvoModel:
    """Reconstruct a model through the checked operations, renaming ids."""
    result = IrvoModel(name=name or model.name, intent=model.intent)
    for place in sorted(model.places):
        result.add_place(place)
    for boundary in model.boundaries:
        result.add_boundary(boundary.a, boundary.b, boundary.kind, boundary.viewer)

    def port(p: Port) -> Port:
        return Port(entity=rename(p.entity), channel=p.channel)

    for entity in dependency_order(model.entities.values()):
        if entity.kind == EntityKind.MIXED:
            result.compose_mixed(rename(entity.id), [rename(m) for m in entity.members])
            continue
        mobility = entity.mobility
        if mobility.reference is not None:
            mobility = Mobility(reference=rename(mobility.reference), kind=mobility.kind)
        result.add_entity(entity.model_copy(update={
            "id": rename(entity.id),
            "nested_in": rename(entity.nested_in) if entity.nested_in else None,
            "mobility": mobility,
        }))
    for relation in model.relations:
        result.add_relation(
            port(relation.source),
            port(relation.target),
            relation.kind,
            salient=relation.salient,
            channel=relation.channel,
            via=[rename(t) for t in relation.via],
            annotation=relation.annotation,
        )
    for merge in model.merges:
        result.add_merge(rename(merge.id), [port(p) for p in merge.inputs], port(merge.output))
    return result


def rename_entities(model: IrvoModel, mapping: Dict[str, str]) -> IrvoModel:
    """Alias identifiers before merging diagrams from different tasks."""
    if not mapping:
        return model
    logger.info(f"Renaming {len(mapping)} identifier(s) in model '{model.name}'")
    return rebuild(model, lambda node_id: mapping.get(node_id, node_id))


def structurally_equal(first: IrvoModel, second: IrvoModel) -> bool:
    return first.canonical_key() == second.canonical_key()
