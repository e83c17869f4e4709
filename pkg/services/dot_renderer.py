"""
DOT text for IRVO diagrams.

Real entities go in one cluster (with a sub-cluster per place), virtual ones
in another, transducers in a dashed R/V cluster between them. Output only
depends on model structure, so structurally equal models render identically.
"""

import logging
from typing import Dict, List, Tuple

from pydantic import BaseModel

from services.irvo_model import Entity, EntityKind, IrvoModel, Relation, RelationKind, World

logger = logging.getLogger(__name__)

CROSSING_MARKER = "R/V"

SHAPES = {
    EntityKind.USER: "ellipse",
    EntityKind.TOOL: "box",
    EntityKind.OBJECT: "box",
    EntityKind.INTERNAL: "box3d",
    EntityKind.SENSOR: "trapezium",
    EntityKind.EFFECTOR: "invtrapezium",
}


class RenderOptions(BaseModel):
    show_dashed: bool = True
    show_transducers: bool = True
    cluster_places: bool = True


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _label(*lines: str) -> str:
    escaped = [line.replace("\\", "\\\\").replace('"', '\\"') for line in lines if line]
    return '"' + "\\n".join(escaped) + '"'


def _relation_key(relation: Relation) -> Tuple:
    return (
        str(relation.source), str(relation.target), relation.kind.value, relation.channel.value,
        tuple(relation.via), not relation.salient, relation.annotation or "",
    )


class DotRenderer:
    def __init__(self, options: RenderOptions = None):
        self.options = options or RenderOptions()

    def to_dot(self, model: IrvoModel) -> str:
        options = self.options
        out = [
            f"digraph {_quote(model.name)} {{",
            '  graph [rankdir=LR, compound=true, fontname="Helvetica"];',
            '  node [fontname="Helvetica"];',
            '  edge [fontname="Helvetica"];',
        ]

        real = [e for e in model.sorted_entities() if e.world == World.REAL]
        virtual = [e for e in model.sorted_entities() if e.world == World.VIRTUAL]
        transducers = [e for e in model.sorted_entities() if e.is_transducer]

        out.append("  subgraph cluster_real {")
        out.append('    label="R"; style=solid;')
        if options.cluster_places:
            by_place: Dict[str, List[Entity]] = {}
            for entity in real:
                by_place.setdefault(model.effective_place(entity.id) or "", []).append(entity)
            for place in sorted(p for p in by_place if p):
                out.append(f"    subgraph {_quote('cluster_place_' + place)} {{")
                out.append(f"      label={_quote(place)}; style=rounded;")
                out.extend("      " + self._node(model, e) for e in by_place[place])
                out.append("    }")
            out.extend("    " + self._node(model, e) for e in by_place.get("", []))
        else:
            out.extend("    " + self._node(model, e) for e in real)
        out.append("  }")

        out.append("  subgraph cluster_virtual {")
        out.append('    label="V"; style=solid;')
        out.extend("    " + self._node(model, e) for e in virtual)
        out.append("  }")

        if options.show_transducers and transducers:
            out.append("  subgraph cluster_transducers {")
            out.append(f'    label="{CROSSING_MARKER}"; style=dashed;')
            out.extend("    " + self._node(model, e) for e in transducers)
            out.append("  }")

        for merge in sorted(model.merges, key=lambda m: m.id):
            out.append(f'  {_quote(merge.id)} [shape=circle, label="⊕", width=0.3, fixedsize=true];')
        for group in model.entities_of(EntityKind.MIXED):
            out.append(f"  {_quote(group.id)} [shape=box, style=dashed, label={_label(group.id, 'Mixed')}];")
            for member in group.members:
                out.append(f"  {_quote(group.id)} -> {_quote(member)} [style=dashed, arrowhead=none];")

        shown = []
        for relation in sorted(model.relations, key=_relation_key):
            if not relation.salient and not options.show_dashed:
                continue
            shown.append(relation)
            out.extend("  " + line for line in self._edges(model, relation))
        out.extend("  " + line for line in self._merge_outputs(model, shown))

        out.append("}")
        logger.debug(f"Rendered model '{model.name}' to DOT")
        return "\n".join(out) + "\n"

    def _node(self, model: IrvoModel, entity: Entity) -> str:
        mobility = model.effective_mobility(entity.id).label()
        tag = f"{entity.tag} {mobility}".strip()
        style = ', style="rounded,filled", fillcolor=lightgrey' if entity.stack else ""
        return f"{_quote(entity.id)} [shape={SHAPES[entity.kind]}, label={_label(entity.id, tag)}{style}];"

    def _edges(self, model: IrvoModel, relation: Relation) -> List[str]:
        stops: List[Tuple[str, bool]] = []
        crossed = False
        for node in model.hops(relation):
            entity = model.entities.get(node)
            if entity is not None and entity.is_transducer and not self.options.show_transducers:
                crossed = True
                continue
            stops.append((node, crossed))
            crossed = False

        attributes = []
        if not relation.salient:
            attributes.append("style=dashed")
        if relation.kind == RelationKind.PERCEPTION:
            attributes.append("color=blue")
        elif relation.kind == RelationKind.COMMUNICATION:
            attributes.append("dir=both")

        merges = {merge.id for merge in model.merges}
        lines = []
        for index, ((head, _), (tail, crossing)) in enumerate(zip(stops, stops[1:])):
            if head in merges:
                continue
            segment = list(attributes)
            text = []
            if index == 0:
                text.append(relation.channel.value)
                if relation.annotation:
                    text.append(relation.annotation)
                summary = f"{relation.source} -> {relation.target} {relation.kind.value}"
                segment.append(f"comment={_quote(summary)}")
            if crossing:
                text.append(CROSSING_MARKER)
            if text:
                segment.insert(0, f"label={_label(' '.join(text))}")
            lines.append(f"{_quote(head)} -> {_quote(tail)} [{', '.join(segment)}];")
        return lines

    def _merge_outputs(self, model: IrvoModel, shown: List[Relation]) -> List[str]:
        """One edge per merge node into its user, dashed only when every routed relation is."""
        lines = []
        for merge in sorted(model.merges, key=lambda m: m.id):
            routed = [relation for relation in shown if model.merge_for(relation) == merge]
            if not routed:
                continue
            segment = [f"label={_label(merge.channel.value)}"]
            if not any(relation.salient for relation in routed):
                segment.append("style=dashed")
            segment.append("color=blue")
            lines.append(f"{_quote(merge.id)} -> {_quote(merge.output.entity)} [{', '.join(segment)}];")
        return lines
