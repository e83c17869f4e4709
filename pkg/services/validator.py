"""
Design-rule checker for IRVO models.

Structural rules (S1-S6) guard the world/boundary/transducer semantics;
ergonomic rules (R1, R2, R4, R5) look at action and perception paths.
Every rule is a pure function of the model and can be run on its own.
"""

import json
import logging
from enum import Enum
from typing import Dict, Iterable, List, Optional, Set

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field

from services.irvo_model import (
    BoundaryKind,
    Channel,
    Entity,
    EntityKind,
    IrvoModel,
    Relation,
    RelationKind,
    TaskIntent,
    World,
)

logger = logging.getLogger(__name__)

LINT_SCHEMA = "irvo-lint/1"

# R3 is reported under S3/S4.
RULE_ORDER = ["S1", "S2", "S3", "S4", "S5", "S6", "R1", "R2", "R4", "R5"]

GLOBAL_WYSIWIS_NOTE = "R5 applied globally: every user must perceive every shared object, whatever their place"


class Severity(str, Enum):
    ERROR = "Error"
    WARNING = "Warning"
    INFO = "Info"

    @property
    def rank(self) -> int:
        return {"Error": 2, "Warning": 1, "Info": 0}[self.value]


class Finding(BaseModel):
    model_config = ConfigDict(frozen=True)

    rule: str
    severity: Severity
    message: str
    nodes: List[str] = Field(default_factory=list)

    def sort_key(self):
        order = RULE_ORDER.index(self.rule) if self.rule in RULE_ORDER else len(RULE_ORDER)
        return order, self.nodes[0] if self.nodes else "", self.message

    def __str__(self) -> str:
        nodes = f" [{', '.join(self.nodes)}]" if self.nodes else ""
        return f"{self.rule} {self.severity.value}: {self.message}{nodes}"


class LintReport(BaseModel):
    model: str
    findings: List[Finding] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)

    def count(self, severity: Severity) -> int:
        return sum(1 for finding in self.findings if finding.severity == severity)

    @property
    def summary(self) -> Dict[str, int]:
        return {
            "errors": self.count(Severity.ERROR),
            "warnings": self.count(Severity.WARNING),
            "infos": self.count(Severity.INFO),
        }

    @property
    def has_errors(self) -> bool:
        return self.count(Severity.ERROR) > 0

    def at_least(self, threshold: Severity) -> List[Finding]:
        return [f for f in self.findings if f.severity.rank >= threshold.rank]

    def to_json(self, threshold: Severity = Severity.INFO) -> str:
        document = {
            "schema": LINT_SCHEMA,
            "model": self.model,
            "findings": [f.model_dump(mode="json") for f in self.at_least(threshold)],
            "summary": self.summary,
            "notes": list(self.notes),
        }
        return json.dumps(document, indent=2, ensure_ascii=False)

    def to_text(self, threshold: Severity = Severity.INFO) -> str:
        lines = [f"{self.model}: {f}" for f in self.at_least(threshold)]
        counts = self.summary
        lines.append(
            f"{self.model}: {counts['errors']} error(s), {counts['warnings']} warning(s), {counts['infos']} info(s)"
        )
        return "\n".join(lines)


def _finding(rule: str, severity: Severity, message: str, *nodes: str) -> Finding:
    return Finding(rule=rule, severity=severity, message=message, nodes=list(nodes))


def _reaches(graph: nx.DiGraph, sources: Iterable[str], target: str, blocked: Set[str]) -> bool:
    """True when a simple path leads from one of `sources` to `target` avoiding `blocked`."""
    view = nx.restricted_view(graph, blocked - {target}, [])
    if target not in view:
        return False
    return any(source in view and nx.has_path(view, source, target) for source in sources)


class IrvoValidator:
    """Runs the rule catalog against a model and collects a LintReport."""

    def check(self, model: IrvoModel) -> LintReport:
        findings: List[Finding] = []
        for rule in (
            self.rule_world_placement,
            self.rule_transducers,
            self.rule_mixed_groups,
            self.rule_virtual_openness,
            self.rule_loop,
            self.rule_observability,
            self.rule_continuity,
            self.rule_wysiwis,
        ):
            findings.extend(rule(model))
        findings.sort(key=Finding.sort_key)

        notes = [GLOBAL_WYSIWIS_NOTE] if len(model.users()) >= 2 else []
        report = LintReport(model=model.name, findings=findings, notes=notes)
        logger.info(f"Checked model '{model.name}': {report.summary}")
        return report

    # ------------------------------------------------------------------
    # structural rules

    def rule_world_placement(self, model: IrvoModel) -> List[Finding]:
        expected = {
            EntityKind.USER: {World.REAL},
            EntityKind.INTERNAL: {World.VIRTUAL},
            EntityKind.TOOL: {World.REAL, World.VIRTUAL},
            EntityKind.OBJECT: {World.REAL, World.VIRTUAL},
            EntityKind.SENSOR: {World.STRADDLING},
            EntityKind.EFFECTOR: {World.STRADDLING},
            EntityKind.MIXED: {World.STRADDLING},
        }
        findings = []
        for entity in model.sorted_entities():
            if entity.world not in expected[entity.kind]:
                world = entity.world.value if entity.world else "no"
                findings.append(_finding(
                    "S1", Severity.ERROR,
                    f"{entity.kind.value} '{entity.id}' cannot live in {world} world", entity.id,
                ))
        return findings

    def rule_transducers(self, model: IrvoModel) -> List[Finding]:
        """World crossings (S2), transducer direction (S3) and channel (S4)."""
        findings = []
        for relation in model.relations:
            findings.extend(self._walk(model, relation))
        return findings

    def _walk(self, model: IrvoModel, relation: Relation) -> List[Finding]:
        findings = []
        nodes = [node for node in model.hops(relation) if node in model.entities]
        source = model.entities[nodes[0]]
        world = source.world
        place = model.effective_place(source.id) if world == World.REAL else None
        crossed_without_transducer = False

        for node in nodes[1:]:
            entity = model.entities[node]
            if entity.is_transducer:
                wrong = World.VIRTUAL if entity.kind == EntityKind.SENSOR else World.REAL
                if world == wrong:
                    findings.append(_finding(
                        "S3", Severity.ERROR,
                        f"{entity.kind.value} '{entity.id}' is crossed from the {world.value} world",
                        relation.id, entity.id,
                    ))
                if entity.channel != relation.channel:
                    findings.append(_finding(
                        "S4", Severity.ERROR,
                        f"{relation.channel.value} relation crosses {entity.kind.value} '{entity.id}' "
                        f"of channel {entity.channel.value}",
                        relation.id, entity.id,
                    ))
                if world == World.REAL:
                    findings.extend(self._check_wall(model, relation, place, entity))
                    world, place = World.VIRTUAL, None
                else:
                    world, place = World.REAL, model.effective_place(entity.id)
                continue

            if entity.world != world:
                if not crossed_without_transducer:
                    findings.append(_finding(
                        "S2", Severity.ERROR,
                        f"relation {relation.source} -> {relation.target} enters '{entity.id}' in the "
                        f"{entity.world.value} world without a transducer",
                        relation.id, entity.id,
                    ))
                crossed_without_transducer = True
                world = entity.world
                place = model.effective_place(entity.id) if world == World.REAL else None
                continue
            if world == World.REAL:
                findings.extend(self._check_wall(model, relation, place, entity))
                place = model.effective_place(entity.id) or place

        target = model.entities[nodes[-1]]
        if (
            len(relation.via) > 1
            and {source.world, target.world} == {World.REAL, World.VIRTUAL}
            and not crossed_without_transducer
        ):
            findings.append(_finding(
                "S2", Severity.ERROR,
                f"relation {relation.source} -> {relation.target} crosses between worlds through "
                f"{len(relation.via)} transducers instead of one",
                relation.id, *relation.via,
            ))
        return findings

    def _check_wall(
        self, model: IrvoModel, relation: Relation, place: Optional[str], entity: Entity
    ) -> List[Finding]:
        target_place = model.effective_place(entity.id)
        if place is None or target_place is None or place == target_place:
            return []
        boundary = model.boundary_between(place, target_place)
        kind = boundary.kind if boundary is not None else BoundaryKind.OPAQUE
        if kind == BoundaryKind.AUDIO and relation.channel == Channel.A:
            return []
        if (
            kind == BoundaryKind.MIRROR
            and relation.channel == Channel.V
            and entity.kind == EntityKind.USER
            and boundary.viewer == target_place
        ):
            return []
        return [_finding(
            "S2", Severity.ERROR,
            f"{relation.channel.value} relation {relation.source} -> {relation.target} crosses the "
            f"{kind.value} boundary between '{place}' and '{target_place}'",
            relation.id, entity.id,
        )]

    def rule_mixed_groups(self, model: IrvoModel) -> List[Finding]:
        findings = []
        for group in model.entities_of(EntityKind.MIXED):
            members = [model.entities.get(member) for member in group.members]
            if any(m is None or not m.is_artifact for m in members) or len(members) < 2:
                findings.append(_finding(
                    "S5", Severity.ERROR, f"mixed group '{group.id}' needs two or more tools or objects", group.id,
                ))
                continue
            if len({m.world for m in members}) < 2:
                findings.append(_finding(
                    "S5", Severity.ERROR, f"mixed group '{group.id}' does not span both worlds", group.id,
                ))
        return findings

    def rule_virtual_openness(self, model: IrvoModel) -> List[Finding]:
        return [
            _finding("S6", Severity.ERROR, f"virtual entity '{entity.id}' has place '{entity.place}'", entity.id)
            for entity in model.sorted_entities()
            if entity.world == World.VIRTUAL and entity.place is not None
        ]

    # ------------------------------------------------------------------
    # ergonomic rules

    def rule_loop(self, model: IrvoModel) -> List[Finding]:
        """Action-perception loop per user, or perception-only shape."""
        users = set(model.users())
        objects = [entity.id for entity in model.entities_of(EntityKind.OBJECT)]
        salient = model.flow_graph(salient_only=True)
        findings = []

        if model.intent == TaskIntent.PERCEPTION_ONLY:
            for tool in model.entities_of(EntityKind.TOOL):
                findings.append(_finding(
                    "R1", Severity.ERROR, f"perception-only task uses tool '{tool.id}'", tool.id,
                ))
            for user in sorted(users):
                if not _reaches(salient, objects, user, users):
                    findings.append(_finding(
                        "R1", Severity.ERROR, f"user '{user}' perceives no domain object", user,
                    ))
            return findings

        full = model.flow_graph()
        for user in sorted(users):
            if self._has_loop(model, salient, user, users, objects, salient_only=True):
                continue
            if self._has_loop(model, full, user, users, objects, salient_only=False):
                leg = self._dashed_leg(model, salient, full, user, users, objects)
                message = (
                    f"user '{user}' closes the action-perception loop only through dashed relations; "
                    f"make {leg} salient"
                )
            else:
                message = f"user '{user}' has no action-perception loop through a tool and a domain object"
            findings.append(_finding("R1", Severity.ERROR, message, user))
        return findings

    def _dashed_leg(
        self,
        model: IrvoModel,
        salient: nx.DiGraph,
        full: nx.DiGraph,
        user: str,
        users: Set[str],
        objects: List[str],
    ) -> str:
        """Which half of the dashed-only loop needs a salient relation."""
        salient_tools = self._action_tools(model, user, salient_only=True)
        all_tools = self._action_tools(model, user, salient_only=False)
        action_salient = perception_salient = False
        for obj in objects:
            if not _reaches(full, [obj], user, users):
                continue
            if not any(_reaches(full, [tool], obj, users) for tool in all_tools):
                continue
            if _reaches(salient, [obj], user, users):
                perception_salient = True
            if any(_reaches(salient, [tool], obj, users) for tool in salient_tools):
                action_salient = True
        if perception_salient:
            return "the action through the tool"
        if action_salient:
            return "the perception of the domain object"
        return "the action through the tool and the perception of the domain object"

    def _action_tools(self, model: IrvoModel, user: str, salient_only: bool) -> List[str]:
        return sorted({
            relation.target.entity
            for relation in model.relations
            if relation.kind == RelationKind.ACTION
            and relation.source.entity == user
            and model.entities[relation.target.entity].kind == EntityKind.TOOL
            and (relation.salient or not salient_only)
        })

    def _has_loop(
        self,
        model: IrvoModel,
        graph: nx.DiGraph,
        user: str,
        users: Set[str],
        objects: List[str],
        salient_only: bool,
    ) -> bool:
        tools = self._action_tools(model, user, salient_only)
        if not tools:
            return False
        for obj in objects:
            if not _reaches(graph, [obj], user, users):
                continue
            if any(_reaches(graph, [tool], obj, users) for tool in tools):
                return True
        return False

    def rule_observability(self, model: IrvoModel) -> List[Finding]:
        acted = sorted({
            (relation.source.entity, relation.target.entity)
            for relation in model.relations
            if relation.kind == RelationKind.ACTION
            and model.entities[relation.source.entity].kind == EntityKind.USER
            and model.entities[relation.target.entity].kind == EntityKind.TOOL
        })
        findings = []
        for user, tool in acted:
            parts = self._nested_parts(model, tool)
            feedback = [
                relation for relation in model.relations
                if relation.kind == RelationKind.PERCEPTION
                and relation.target.entity == user
                and relation.source.entity in parts | {tool}
            ]
            if any(r.salient and r.source.entity == tool for r in feedback):
                continue
            if feedback:
                findings.append(_finding(
                    "R2", Severity.INFO,
                    f"'{user}' gets feedback on tool '{tool}' only through dashed or embedded perception",
                    tool, user,
                ))
            else:
                findings.append(_finding(
                    "R2", Severity.WARNING, f"'{user}' cannot perceive the state of tool '{tool}'", tool, user,
                ))
        return findings

    def _nested_parts(self, model: IrvoModel, host: str) -> Set[str]:
        parts: Set[str] = set()
        frontier = [host]
        while frontier:
            current = frontier.pop()
            for entity in model.entities.values():
                if entity.nested_in == current and entity.id not in parts:
                    parts.add(entity.id)
                    frontier.append(entity.id)
        return parts

    def rule_continuity(self, model: IrvoModel) -> List[Finding]:
        findings = []
        perceptions = [r for r in model.relations if r.kind == RelationKind.PERCEPTION]
        for group in model.entities_of(EntityKind.MIXED):
            members = set(group.members)
            perceivers = sorted({r.target.entity for r in perceptions if r.source.entity in members})
            for user in perceivers:
                channels: Dict[Channel, Set[str]] = {}
                for member in group.members:
                    seen = [r for r in perceptions if r.source.entity == member and r.target.entity == user]
                    if not seen:
                        findings.append(_finding(
                            "R4", Severity.WARNING,
                            f"'{user}' perceives group '{group.id}' but not its member '{member}'",
                            group.id, member, user,
                        ))
                    for relation in seen:
                        channels.setdefault(relation.channel, set()).add(member)

                for channel, sharing in sorted(channels.items(), key=lambda item: item[0].value):
                    if len(sharing) < 2:
                        continue
                    merged = any(
                        merge.output.entity == user
                        and merge.channel == channel
                        and sharing <= merge.input_entities()
                        for merge in model.merges
                    )
                    if not merged:
                        findings.append(_finding(
                            "R4", Severity.WARNING,
                            f"members {', '.join(sorted(sharing))} of '{group.id}' reach '{user}' on channel "
                            f"{channel.value} without a merge",
                            group.id, user,
                        ))
        return findings

    def rule_wysiwis(self, model: IrvoModel) -> List[Finding]:
        users = model.users()
        if len(users) < 2:
            return [_finding("R5", Severity.INFO, "single-user model; shared perception not checked")]

        graph = model.flow_graph()
        blocked = set(users)
        findings = []
        for unit, members in self._shared_units(model):
            for user in users:
                if not _reaches(graph, members, user, blocked):
                    findings.append(_finding(
                        "R5", Severity.WARNING, f"'{user}' cannot perceive shared object '{unit}'", unit, user,
                    ))
        return findings

    def _shared_units(self, model: IrvoModel) -> List[tuple]:
        units = []
        for group in model.entities_of(EntityKind.MIXED):
            if any(model.entities[m].kind == EntityKind.OBJECT for m in group.members):
                units.append((group.id, list(group.members)))
        for obj in model.entities_of(EntityKind.OBJECT):
            if model.group_of(obj.id) is None:
                units.append((obj.id, [obj.id]))
        return sorted(units)
