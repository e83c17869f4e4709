"""
Task tree integration: link IRVO diagrams to tasks, merge them up to the
root and spot isolated tool/object clusters in the synthetic diagram.
"""

import json
import logging
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import networkx as nx
from pydantic import BaseModel, Field, model_validator

from services.dsl_parser import load_model, model_from_document
from services.irvo_model import (
    Entity,
    EntityKind,
    IrvoModel,
    Mobility,
    Port,
    Relation,
    dependency_order,
    rename_entities,
    structurally_equal,
)
from services.validator import Finding, Severity
from utils.errors import (
    AttributeConflict,
    ConflictingDescendantLink,
    IncompatibleIntent,
    InvalidTaskTree,
    IrvoError,
    TaskAlreadyLinked,
    UncoveredLeaf,
    UnknownTask,
)

logger = logging.getLogger(__name__)

TREE_SCHEMA = "irvo-tree/1"

DiagramLinks = Dict[str, IrvoModel]


class TaskNode(BaseModel):
    id: str
    name: str = ""
    operator: Optional[str] = None
    children: List["TaskNode"] = Field(default_factory=list)
    link: Optional[Union[str, dict]] = None

    @property
    def is_leaf(self) -> bool:
        return not self.children


class TaskTree(BaseModel):
    """Task hierarchy; temporal operators are kept as opaque labels."""

    root: TaskNode

    @model_validator(mode="after")
    def _unique_ids(self) -> "TaskTree":
        seen = set()
        for node in self.walk():
            if node.id in seen:
                raise InvalidTaskTree(f"task id '{node.id}' appears twice", node.id)
            seen.add(node.id)
        return self

    def walk(self) -> Iterator[TaskNode]:
        """Pre-order traversal."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def find(self, task_id: str) -> TaskNode:
        for node in self.walk():
            if node.id == task_id:
                return node
        raise UnknownTask(f"unknown task '{task_id}'", task_id)

    def ancestors(self, task_id: str) -> List[str]:
        parents = {child.id: node.id for node in self.walk() for child in node.children}
        self.find(task_id)
        chain = []
        while task_id in parents:
            task_id = parents[task_id]
            chain.append(task_id)
        return chain

    def descendants(self, task_id: str) -> List[str]:
        node = self.find(task_id)
        return [n.id for n in TaskTree.model_construct(root=node).walk()][1:]

    def leaves(self) -> List[str]:
        return [node.id for node in self.walk() if node.is_leaf]


class MergeOutcome(BaseModel):
    model: IrvoModel
    notes: List[str] = Field(default_factory=list)


def _show(value) -> str:
    return str(getattr(value, "value", value))


def _pick(subject: str, attribute: str, first, second, unset=None):
    """Specified value wins; two different specified values conflict."""
    if first == unset:
        return second
    if second == unset or first == second:
        return first
    raise AttributeConflict(subject, attribute, f"{_show(first)} vs {_show(second)}")


class ModelMerger:
    """Union of diagrams keyed by identifier."""

    def merge(self, models: Sequence[IrvoModel], name: str = "merged") -> MergeOutcome:
        if not models:
            raise IrvoError("nothing to merge")
        intents = {model.intent for model in models}
        if len(intents) > 1:
            raise IncompatibleIntent(
                "cannot merge diagrams of different intents: " + ", ".join(sorted(i.value for i in intents))
            )

        notes: List[str] = []
        boundaries = {}
        entities: Dict[str, Entity] = {}
        relations: Dict[Tuple, Relation] = {}
        merges: Dict[str, Tuple[Port, Dict[str, Port]]] = {}

        for model in models:
            for boundary in model.boundaries:
                key = (boundary.a, boundary.b)
                if key in boundaries and boundaries[key] != boundary:
                    raise AttributeConflict(f"{boundary.a}/{boundary.b}", "boundary")
                boundaries[key] = boundary
            for entity in model.entities.values():
                entities[entity.id] = self._merge_entity(entities.get(entity.id), entity)
            for relation in model.relations:
                key = (str(relation.source), str(relation.target), relation.kind.value, relation.channel.value)
                relations[key] = self._merge_relation(relations.get(key), relation, key, notes)
            for merge in model.merges:
                output, inputs = merges.get(merge.id, (merge.output, {}))
                if output != merge.output:
                    raise AttributeConflict(merge.id, "output", f"{output} vs {merge.output}")
                for port in merge.inputs:
                    inputs.setdefault(port.entity, port)
                merges[merge.id] = (output, inputs)

        result = IrvoModel(name=name, intent=models[0].intent)
        for place in sorted(set().union(*(model.places for model in models))):
            result.add_place(place)
        for (a, b), boundary in sorted(boundaries.items()):
            result.add_boundary(a, b, boundary.kind, boundary.viewer)
        for entity in dependency_order(entities.values()):
            if entity.kind == EntityKind.MIXED:
                result.compose_mixed(entity.id, entity.members)
            else:
                result.add_entity(entity)
        for key in sorted(relations):
            relation = relations[key]
            result.add_relation(
                relation.source, relation.target, relation.kind,
                salient=relation.salient, channel=relation.channel,
                via=relation.via, annotation=relation.annotation,
            )
        for merge_id in sorted(merges):
            output, inputs = merges[merge_id]
            result.add_merge(merge_id, [inputs[e] for e in sorted(inputs)], output)

        logger.debug(f"Merged {len(models)} diagram(s) into '{name}' with {len(result.entities)} entities")
        return MergeOutcome(model=result, notes=notes)

    def _merge_entity(self, current: Optional[Entity], incoming: Entity) -> Entity:
        if current is None:
            return incoming
        subject = incoming.id
        for attribute in ("kind", "world", "channel"):
            if getattr(current, attribute) != getattr(incoming, attribute):
                raise AttributeConflict(
                    subject, attribute, f"{_show(getattr(current, attribute))} vs {_show(getattr(incoming, attribute))}"
                )
        if current.kind == EntityKind.MIXED:
            extra = [m for m in incoming.members if m not in current.members]
            return current.model_copy(update={"members": current.members + extra})
        return current.model_copy(update={
            "place": _pick(subject, "place", current.place, incoming.place),
            "nested_in": _pick(subject, "nested_in", current.nested_in, incoming.nested_in),
            "mobility": _pick(subject, "mobility", current.mobility, incoming.mobility, Mobility()),
            "stack": current.stack or incoming.stack,
        })

    def _merge_relation(
        self, current: Optional[Relation], incoming: Relation, key: Tuple, notes: List[str]
    ) -> Relation:
        if current is None:
            return incoming
        label = f"{key[0]} -> {key[1]} {key[2]}"
        if current.via != incoming.via:
            raise AttributeConflict(label, "via", f"{current.via} vs {incoming.via}")
        if current.salient != incoming.salient:
            notes.append(f"relation {label} is dashed in one diagram and salient in another; kept salient")
        annotations = [a for a in (current.annotation, incoming.annotation) if a is not None]
        return current.model_copy(update={
            "salient": current.salient or incoming.salient,
            "annotation": min(annotations) if annotations else None,
        })


def merge_models(models: Sequence[IrvoModel], name: str = "merged") -> IrvoModel:
    return ModelMerger().merge(models, name).model


class TaskMapper:
    """Links diagrams to tasks and synthesizes the root diagram."""

    def __init__(self, merger: Optional[ModelMerger] = None):
        self.merger = merger or ModelMerger()
        self.notes: List[str] = []

    def link(self, tree: TaskTree, links: DiagramLinks, task_id: str, model: IrvoModel) -> DiagramLinks:
        tree.find(task_id)
        if task_id in links:
            raise TaskAlreadyLinked(f"task '{task_id}' already has a diagram", task_id)
        for ancestor in tree.ancestors(task_id):
            if ancestor in links:
                raise ConflictingDescendantLink(
                    f"task '{task_id}' lies under '{ancestor}', which already has a diagram", task_id
                )
        for descendant in tree.descendants(task_id):
            if descendant in links:
                raise ConflictingDescendantLink(
                    f"task '{task_id}' has descendant '{descendant}' with its own diagram", task_id
                )
        return {**links, task_id: model}

    def synthesize(self, tree: TaskTree, links: DiagramLinks) -> Dict[str, IrvoModel]:
        """Model for every linked or internal task, bottom-up."""
        self.notes = []
        results: Dict[str, IrvoModel] = {}

        def visit(node: TaskNode) -> IrvoModel:
            if node.id in links:
                results[node.id] = links[node.id]
                return results[node.id]
            if node.is_leaf:
                raise UncoveredLeaf(f"task '{node.id}' has no diagram on itself or an ancestor", node.id)
            children = [visit(child) for child in node.children]
            outcome = self.merger.merge(children, name=node.id)
            self.notes.extend(note for note in outcome.notes if note not in self.notes)
            results[node.id] = outcome.model
            return outcome.model

        visit(tree.root)
        logger.info(f"Synthesized {len(results)} task diagram(s) up to '{tree.root.id}'")
        return results

    def factor_links(self, tree: TaskTree, links: DiagramLinks) -> DiagramLinks:
        """Move links shared by all children of a task up to that task, to fixpoint."""
        links = dict(links)
        nodes = list(tree.walk())
        changed = True
        while changed:
            changed = False
            for node in reversed(nodes):
                if node.is_leaf or node.id in links:
                    continue
                if not all(child.id in links for child in node.children):
                    continue
                first = links[node.children[0].id]
                if all(structurally_equal(first, links[child.id]) for child in node.children[1:]):
                    for child in node.children:
                        del links[child.id]
                    links[node.id] = first
                    changed = True
                    logger.debug(f"Factored shared diagram up to task '{node.id}'")
        return links

    def odd_configurations(self, root_model: IrvoModel, leaf_models: Dict[str, IrvoModel]) -> List[Finding]:
        """Tool/object clusters that are disconnected from the rest and used by a single task."""
        excluded = (EntityKind.USER, EntityKind.INTERNAL, EntityKind.SENSOR, EntityKind.EFFECTOR, EntityKind.MIXED)
        graph = nx.Graph()
        graph.add_nodes_from(e.id for e in root_model.entities.values() if e.kind not in excluded)
        for relation in root_model.relations:
            ends = (relation.source.entity, relation.target.entity)
            if all(end in graph for end in ends):
                graph.add_edge(*ends)
        for entity in root_model.entities.values():
            if entity.kind == EntityKind.MIXED:
                nx.add_path(graph, entity.members)
            elif entity.nested_in in graph and entity.id in graph:
                graph.add_edge(entity.id, entity.nested_in)

        def has_kind(component, kind):
            return any(root_model.entities[n].kind == kind for n in component)

        components = [sorted(c) for c in nx.connected_components(graph)]
        artifact_components = [
            c for c in components if has_kind(c, EntityKind.TOOL) or has_kind(c, EntityKind.OBJECT)
        ]
        findings = []
        for component in sorted(artifact_components):
            if not (has_kind(component, EntityKind.TOOL) and has_kind(component, EntityKind.OBJECT)):
                continue
            if len(artifact_components) < 2:
                continue
            owners = sorted(
                task for task, model in leaf_models.items() if set(component) & set(model.entities)
            )
            if len(owners) != 1:
                continue
            findings.append(Finding(
                rule="ODD",
                severity=Severity.INFO,
                message=f"isolated interaction cluster {', '.join(component)} used only by task '{owners[0]}'",
                nodes=component,
            ))
        return findings


def load_tree(path: Path, cache=None) -> Tuple[TaskTree, DiagramLinks]:
    """Read an irvo-tree/1 file and resolve its diagram links."""
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as e:
        raise InvalidTaskTree(f"{path}: invalid JSON: {e}") from None
    if not isinstance(document, dict):
        raise InvalidTaskTree(f"{path}: task tree must be a JSON object")
    if document.get("schema", TREE_SCHEMA) != TREE_SCHEMA:
        raise InvalidTaskTree(f"{path}: unsupported schema '{document.get('schema')}'")

    aliases = document.get("aliases", {})
    try:
        tree = TaskTree(root=TaskNode.model_validate(document.get("root", document)))
    except ValueError as e:
        raise InvalidTaskTree(f"{path}: {e}") from None

    mapper = TaskMapper()
    links: DiagramLinks = {}
    for node in tree.walk():
        if node.link is None:
            continue
        if isinstance(node.link, dict):
            try:
                model = model_from_document(node.link)
            except IrvoError as e:
                raise InvalidTaskTree(f"{path}: inline diagram of task '{node.id}': {e}", node.id) from None
        else:
            target = path.parent / node.link
            model = cache.load(target) if cache is not None else load_model(target)
        model = rename_entities(model, aliases)
        links = mapper.link(tree, links, node.id, model)
    logger.info(f"Loaded task tree '{tree.root.id}' from {path} with {len(links)} link(s)")
    return tree, links
