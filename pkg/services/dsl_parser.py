"""
Parser and serializer for the `.irvo` text format, plus the irvo-json/1
projection.

The lark grammar only checks shape; everything else (identifiers, worlds,
channels, references) is checked by replaying the declarations through the
IrvoModel construction operations and turning their errors into diagnostics.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from lark import Lark, Token, Transformer
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken
from pydantic import BaseModel

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
from utils.errors import IrvoError, IrvoParseError, ReferenceCycle

logger = logging.getLogger(__name__)

JSON_SCHEMA = "irvo-json/1"

GRAMMAR = r"""
start: "model" STRING "{" _item* "}"

_item: place | boundary | entity | transducer | relation | mixed | merge | intent

place: "place" IDENT
boundary: "boundary" IDENT IDENT boundary_kind
boundary_kind: "opaque"                -> opaque
             | "audio"                 -> audio
             | "mirror" "viewer" IDENT -> mirror

entity: entity_kind IDENT [world] [location] [mobility] [stack] [nesting]
transducer: transducer_kind IDENT "channel" IDENT [location] [mobility]
location: "@" IDENT
mobility: "mobility" [IDENT "/"] mobility_kind
nesting: "in" IDENT

relation: "rel" endpoint "->" endpoint relation_kind [dashed] [declared_channel] [via] [STRING]
endpoint: IDENT ["." IDENT]
declared_channel: "channel" IDENT
via: "via" IDENT ("," IDENT)*

mixed: "mixed" IDENT "{" IDENT ("," IDENT)* "}"
merge: "merge" IDENT "{" endpoint ("," endpoint)* "}" "->" endpoint
intent: "intent" intent_kind

!entity_kind: "user" | "tool" | "object" | "internal"
!transducer_kind: "sensor" | "effector"
!world: "real" | "virtual"
!mobility_kind: "free" | "fixed" | "pinned"
!relation_kind: "action" | "perception" | "communication"
!intent_kind: "manipulation" | "perception"
!stack: "stack"
!dashed: "dashed"

IDENT: /[A-Za-z_][A-Za-z0-9_]*/
COMMENT: /#[^\n]*/

%import common.ESCAPED_STRING -> STRING
%import common.WS
%ignore WS
%ignore COMMENT
"""

_LARK: Optional[Lark] = None


def _lark() -> Lark:
    global _LARK
    if _LARK is None:
        _LARK = Lark(GRAMMAR, parser="lalr", maybe_placeholders=True)
    return _LARK


class SourceSpan(BaseModel):
    """1-based location of a diagnostic in the source text."""

    line: int
    column: int
    length: int = 1

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


class ParseDiagnostic(BaseModel):
    span: SourceSpan
    code: str
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"{self.span} {self.severity} {self.code}: {self.message}"


class ParseResult(BaseModel):
    """Either a model (warnings allowed) or error diagnostics, never both."""

    model: Optional[IrvoModel] = None
    diagnostics: List[ParseDiagnostic] = []

    @property
    def ok(self) -> bool:
        return self.model is not None

    @property
    def errors(self) -> List[ParseDiagnostic]:
        return [d for d in self.diagnostics if d.severity == "error"]

    @property
    def warnings(self) -> List[ParseDiagnostic]:
        return [d for d in self.diagnostics if d.severity == "warning"]


def _span(token: Token) -> SourceSpan:
    return SourceSpan(line=token.line, column=token.column, length=max(len(token), 1))


class _Declarations(Transformer):
    """Turns the parse tree into declaration dicts that keep their tokens."""

    def start(self, children):
        return children[0], children[1:]

    def _first(self, children):
        return children[0]

    entity_kind = transducer_kind = world = mobility_kind = _first
    relation_kind = intent_kind = stack = dashed = _first
    location = nesting = declared_channel = _first

    def via(self, children):
        return list(children)

    def mobility(self, children):
        reference, kind = children
        return {"reference": reference, "kind": kind}

    def endpoint(self, children):
        entity, channel = children
        return {"entity": entity, "channel": channel}

    def opaque(self, children):
        return BoundaryKind.OPAQUE, None

    def audio(self, children):
        return BoundaryKind.AUDIO, None

    def mirror(self, children):
        return BoundaryKind.MIRROR, children[0]

    def place(self, children):
        return {"item": "place", "id": children[0]}

    def boundary(self, children):
        a, b, (kind, viewer) = children
        return {"item": "boundary", "a": a, "b": b, "kind": kind, "viewer": viewer}

    def entity(self, children):
        kind, ident, world, place, mobility, stack, nested_in = children
        return {
            "item": "entity", "kind": kind, "id": ident, "world": world, "place": place,
            "mobility": mobility, "stack": stack is not None, "nested_in": nested_in, "channel": None,
        }

    def transducer(self, children):
        kind, ident, channel, place, mobility = children
        return {
            "item": "entity", "kind": kind, "id": ident, "world": None, "place": place,
            "mobility": mobility, "stack": False, "nested_in": None, "channel": channel,
        }

    def relation(self, children):
        source, target, kind, dashed, channel, via, annotation = children
        return {
            "item": "relation", "source": source, "target": target, "kind": kind,
            "salient": dashed is None, "channel": channel, "via": via or [], "annotation": annotation,
        }

    def mixed(self, children):
        return {"item": "mixed", "id": children[0], "members": list(children[1:])}

    def merge(self, children):
        return {"item": "merge", "id": children[0], "inputs": list(children[1:-1]), "output": children[-1]}

    def intent(self, children):
        return {"item": "intent", "kind": children[0]}


class _ModelBuilder:
    """Replays declarations through IrvoModel, collecting diagnostics."""

    def __init__(self, name: str):
        self.model = IrvoModel(name=name)
        self.diagnostics: List[ParseDiagnostic] = []
        self.failed: set = set()

    def report(self, token: Token, code: str, message: str, severity: str = "error") -> None:
        self.diagnostics.append(ParseDiagnostic(span=_span(token), code=code, message=message, severity=severity))

    def report_error(self, error: IrvoError, tokens: List[Optional[Token]]) -> None:
        located = [token for token in tokens if token is not None]
        anchor = next((token for token in located if token.value == error.subject), located[0])
        self.report(anchor, error.code, str(error))

    def channel(self, token: Optional[Token]) -> Optional[Channel]:
        if token is None:
            return None
        try:
            return Channel(token.value)
        except ValueError:
            self.report(token, "E-BAD-CHANNEL", f"unknown channel '{token.value}'; expected one of V, A, KH, T, S")
            raise

    def port(self, endpoint: Dict[str, Token]) -> Port:
        return Port(entity=endpoint["entity"].value, channel=self.channel(endpoint["channel"]))

    def build(self, items: List[Dict[str, Any]]) -> None:
        by_kind: Dict[str, List[Dict[str, Any]]] = {}
        for item in items:
            by_kind.setdefault(item["item"], []).append(item)

        for index, item in enumerate(by_kind.get("intent", [])):
            if index > 0:
                self.report(item["kind"], "E-DUP-INTENT", "intent declared more than once")
            self.model.intent = TaskIntent(item["kind"].value)

        for item in by_kind.get("place", []):
            self.attempt(lambda: self.model.add_place(item["id"].value), [item["id"]])

        for item in by_kind.get("boundary", []):
            tokens = [item["b"], item["a"], item["viewer"]]
            viewer = item["viewer"].value if item["viewer"] is not None else None
            self.attempt(
                lambda: self.model.add_boundary(item["a"].value, item["b"].value, item["kind"], viewer), tokens
            )

        self.build_entities(by_kind.get("entity", []))

        for item in by_kind.get("mixed", []):
            self.build_mixed(item)
        for item in by_kind.get("relation", []):
            self.build_relation(item)
        for item in by_kind.get("merge", []):
            self.build_merge(item)

    def attempt(self, operation, tokens: List[Optional[Token]]) -> bool:
        try:
            operation()
            return True
        except IrvoError as error:
            self.report_error(error, tokens)
            return False

    def build_entities(self, items: List[Dict[str, Any]]) -> None:
        declared: Dict[str, Tuple[Entity, Dict[str, Any]]] = {}
        for item in items:
            ident = item["id"].value
            if ident in declared:
                self.report(item["id"], "E-DUP-ID", f"identifier '{ident}' is already used")
                continue
            entity = self.entity_from(item)
            if entity is None:
                self.failed.add(ident)
                continue
            declared[ident] = (entity, item)

        pending = {ident: entity for ident, (entity, _) in declared.items()}
        while True:
            try:
                ordered = dependency_order(pending.values())
                break
            except ReferenceCycle as error:
                item = declared[error.subject][1]
                self.report(item["id"], error.code, str(error))
                cycle_ids = [part.strip() for part in str(error).split(":", 1)[1].split("->")]
                for ident in cycle_ids:
                    pending.pop(ident, None)
                    self.failed.add(ident)

        for entity in ordered:
            item = declared[entity.id][1]
            references = {entity.nested_in, entity.mobility.reference} - {None}
            if references & self.failed:
                self.failed.add(entity.id)
                continue
            tokens = [item["id"], item["place"], item["nested_in"]]
            if item["mobility"] is not None:
                tokens.append(item["mobility"]["reference"])
            if not self.attempt(lambda: self.model.add_entity(entity), tokens):
                self.failed.add(entity.id)

    def entity_from(self, item: Dict[str, Any]) -> Optional[Entity]:
        kind = EntityKind(item["kind"].value)
        ident = item["id"]
        world = World(item["world"].value) if item["world"] is not None else None
        if kind == EntityKind.INTERNAL and world == World.VIRTUAL:
            self.report(item["world"], "E-TAG-FORBIDDEN", f"internal model '{ident.value}' takes no world tag")
            return None
        if kind in (EntityKind.TOOL, EntityKind.OBJECT) and world is None:
            self.report(
                ident, "W-DEFAULT-WORLD", f"{kind.value} '{ident.value}' has no world tag; assuming real", "warning"
            )
            world = World.REAL
        try:
            channel = self.channel(item["channel"])
        except ValueError:
            return None
        mobility = Mobility()
        if item["mobility"] is not None:
            reference = item["mobility"]["reference"]
            mobility = Mobility(
                reference=reference.value if reference is not None else None,
                kind=MobilityKind(item["mobility"]["kind"].value),
            )
        return Entity(
            id=ident.value,
            kind=kind,
            world=world,
            place=item["place"].value if item["place"] is not None else None,
            mobility=mobility,
            nested_in=item["nested_in"].value if item["nested_in"] is not None else None,
            stack=item["stack"],
            channel=channel,
        )

    def build_mixed(self, item: Dict[str, Any]) -> None:
        members = [token.value for token in item["members"]]
        if set(members) & self.failed:
            self.failed.add(item["id"].value)
            return
        if not self.attempt(lambda: self.model.compose_mixed(item["id"].value, members), [item["id"], *item["members"]]):
            self.failed.add(item["id"].value)

    def build_relation(self, item: Dict[str, Any]) -> None:
        names = {item["source"]["entity"].value, item["target"]["entity"].value}
        names.update(token.value for token in item["via"])
        if names & self.failed:
            return
        try:
            source = self.port(item["source"])
            target = self.port(item["target"])
            channel = self.channel(item["channel"])
        except ValueError:
            return
        annotation = None
        if item["annotation"] is not None:
            annotation = self.string(item["annotation"])
            if annotation is None:
                return
        tokens = [item["source"]["entity"], item["target"]["entity"], *item["via"]]
        self.attempt(
            lambda: self.model.add_relation(
                source,
                target,
                RelationKind(item["kind"].value),
                salient=item["salient"],
                channel=channel,
                via=[token.value for token in item["via"]],
                annotation=annotation,
            ),
            tokens,
        )

    def build_merge(self, item: Dict[str, Any]) -> None:
        endpoints = [*item["inputs"], item["output"]]
        if {endpoint["entity"].value for endpoint in endpoints} & self.failed:
            return
        try:
            inputs = [self.port(endpoint) for endpoint in item["inputs"]]
            output = self.port(item["output"])
        except ValueError:
            return
        tokens = [item["id"], *(endpoint["entity"] for endpoint in endpoints)]
        self.attempt(lambda: self.model.add_merge(item["id"].value, inputs, output), tokens)

    def string(self, token: Token) -> Optional[str]:
        try:
            return json.loads(token.value)
        except ValueError:
            self.report(token, "E-BAD-STRING", "invalid escape sequence in string")
            return None


class IrvoParser:
    """Reads and writes the textual `.irvo` model format."""

    def parse(self, text: str) -> ParseResult:
        try:
            tree = _lark().parse(text)
        except UnexpectedInput as error:
            return ParseResult(diagnostics=[self._syntax_diagnostic(error, text)])

        name_token, items = _Declarations().transform(tree)
        try:
            name = json.loads(name_token.value)
        except ValueError:
            span = _span(name_token)
            return ParseResult(diagnostics=[
                ParseDiagnostic(span=span, code="E-BAD-STRING", message="invalid escape sequence in string")
            ])

        builder = _ModelBuilder(name)
        builder.build(items)
        diagnostics = sorted(builder.diagnostics, key=lambda d: (d.span.line, d.span.column, d.code))
        if any(d.severity == "error" for d in diagnostics):
            logger.debug(f"Model '{name}' rejected with {len(diagnostics)} diagnostic(s)")
            return ParseResult(diagnostics=diagnostics)
        logger.debug(f"Parsed model '{name}': {len(builder.model.entities)} entities, {len(builder.model.relations)} relations")
        return ParseResult(model=builder.model, diagnostics=diagnostics)

    def _syntax_diagnostic(self, error: UnexpectedInput, text: str) -> ParseDiagnostic:
        line, column = getattr(error, "line", None), getattr(error, "column", None)
        if not isinstance(line, int) or line < 1 or not isinstance(column, int) or column < 1:
            line, column = _end_position(text)
        length = 1
        if isinstance(error, UnexpectedToken):
            if error.token.type == "$END":
                line, column = _end_position(text)
                message = "unexpected end of input"
            else:
                length = max(len(error.token), 1)
                message = f"unexpected '{error.token}'; expected {', '.join(sorted(error.expected))}"
        elif isinstance(error, UnexpectedCharacters):
            message = f"unexpected character '{error.char}'"
        elif isinstance(error, UnexpectedEOF):
            line, column = _end_position(text)
            message = "unexpected end of input"
        else:
            message = "syntax error"
        span = SourceSpan(line=line, column=column, length=length)
        return ParseDiagnostic(span=span, code="E-SYNTAX", message=message)

    def serialize(self, model: IrvoModel) -> str:
        """Canonical text: one item per line, entities sorted by kind then id."""
        lines = [f"model {_quote(model.name)} {{", f"  intent {model.intent.value}"]
        lines.extend(f"  place {place}" for place in sorted(model.places))
        for boundary in model.boundaries:
            kind = boundary.kind.value
            if boundary.kind == BoundaryKind.MIRROR:
                kind = f"mirror viewer {boundary.viewer}"
            lines.append(f"  boundary {boundary.a} {boundary.b} {kind}")

        groups = []
        for entity in model.sorted_entities():
            if entity.kind == EntityKind.MIXED:
                groups.append(entity)
                continue
            lines.append("  " + " ".join(self._entity_words(entity)))
        for group in groups:
            lines.append(f"  mixed {group.id} {{ {', '.join(group.members)} }}")

        for relation in model.relations:
            words = ["rel", str(relation.source), "->", str(relation.target), relation.kind.value]
            if not relation.salient:
                words.append("dashed")
            if _needs_declared_channel(model, relation):
                words.extend(["channel", relation.channel.value])
            if relation.via:
                words.extend(["via", ", ".join(relation.via)])
            if relation.annotation is not None:
                words.append(_quote(relation.annotation))
            lines.append("  " + " ".join(words))

        for merge in model.merges:
            inputs = ", ".join(str(port) for port in merge.inputs)
            lines.append(f"  merge {merge.id} {{ {inputs} }} -> {merge.output}")
        lines.append("}")
        return "\n".join(lines) + "\n"

    def _entity_words(self, entity: Entity) -> List[str]:
        words = [entity.kind.value, entity.id]
        if entity.is_transducer:
            words.extend(["channel", entity.channel.value])
        elif entity.is_artifact:
            words.append(entity.world.value)
        if entity.place is not None:
            words.append(f"@{entity.place}")
        mobility = entity.mobility
        if mobility.kind != MobilityKind.UNSPECIFIED:
            reference = f"{mobility.reference}/" if mobility.reference else ""
            words.extend(["mobility", f"{reference}{mobility.kind.value}"])
        if entity.stack:
            words.append("stack")
        if entity.nested_in is not None:
            words.extend(["in", entity.nested_in])
        return words


def _needs_declared_channel(model: IrvoModel, relation) -> bool:
    if relation.source.channel is not None or relation.target.channel is not None:
        return False
    if relation.via:
        return model.entities[relation.via[0]].channel != relation.channel
    return True


def _quote(value: str) -> str:
    return json.dumps(value, ensure_ascii=False)


def _end_position(text: str) -> Tuple[int, int]:
    lines = text.split("\n")
    if len(lines) > 1 and lines[-1] == "":
        lines.pop()
    return max(len(lines), 1), max(len(lines[-1]) if lines else 0, 1)


# ----------------------------------------------------------------------
# JSON projection

def _port_record(port: Port) -> Dict[str, Any]:
    return {"entity": port.entity, "channel": port.channel.value if port.channel else None}


def to_json(model: IrvoModel, indent: Optional[int] = 2) -> str:
    document = {
        "name": model.name,
        "intent": model.intent.value,
        "places": sorted(model.places),
        "boundaries": [
            {"a": b.a, "b": b.b, "kind": b.kind.value, "viewer": b.viewer} for b in model.boundaries
        ],
        "entities": [
            {
                "id": e.id,
                "kind": e.kind.value,
                "world": e.world.value,
                "place": e.place,
                "mobility": {"reference": e.mobility.reference, "kind": e.mobility.kind.value},
                "nested_in": e.nested_in,
                "stack": e.stack,
                "channel": e.channel.value if e.channel else None,
                "members": list(e.members),
            }
            for e in model.sorted_entities()
        ],
        "relations": [
            {
                "id": r.id,
                "from": _port_record(r.source),
                "to": _port_record(r.target),
                "kind": r.kind.value,
                "salient": r.salient,
                "channel": r.channel.value,
                "via": list(r.via),
                "annotation": r.annotation,
            }
            for r in model.relations
        ],
        "merges": [
            {"id": m.id, "inputs": [_port_record(p) for p in m.inputs], "output": _port_record(m.output)}
            for m in model.merges
        ],
        "schema": JSON_SCHEMA,
    }
    return json.dumps(document, indent=indent, ensure_ascii=False)


def from_json(text: str) -> IrvoModel:
    try:
        document = json.loads(text)
    except ValueError as e:
        raise IrvoError(f"invalid JSON: {e}") from None
    if not isinstance(document, dict):
        raise IrvoError("irvo-json document must be an object")
    return model_from_document(document)


def model_from_document(document: Dict[str, Any]) -> IrvoModel:
    if document.get("schema", JSON_SCHEMA) != JSON_SCHEMA:
        raise IrvoError(f"unsupported schema '{document.get('schema')}', expected {JSON_SCHEMA}")

    def port(record: Dict[str, Any]) -> Port:
        channel = record.get("channel")
        return Port(entity=record["entity"], channel=Channel(channel) if channel else None)

    try:
        model = IrvoModel(name=document["name"], intent=TaskIntent(document.get("intent", "manipulation")))
        for place in document.get("places", []):
            model.add_place(place)
        for record in document.get("boundaries", []):
            model.add_boundary(record["a"], record["b"], BoundaryKind(record["kind"]), record.get("viewer"))

        entities = []
        for record in document.get("entities", []):
            mobility = record.get("mobility") or {}
            entities.append(Entity(
                id=record["id"],
                kind=EntityKind(record["kind"]),
                world=World(record["world"]) if record.get("world") else None,
                place=record.get("place"),
                mobility=Mobility(
                    reference=mobility.get("reference"),
                    kind=MobilityKind(mobility.get("kind", MobilityKind.UNSPECIFIED.value)),
                ),
                nested_in=record.get("nested_in"),
                stack=bool(record.get("stack", False)),
                channel=Channel(record["channel"]) if record.get("channel") else None,
                members=record.get("members", []),
            ))
        for entity in dependency_order(entities):
            if entity.kind == EntityKind.MIXED:
                model.compose_mixed(entity.id, entity.members)
            else:
                model.add_entity(entity)

        for record in document.get("relations", []):
            model.add_relation(
                port(record["from"]),
                port(record["to"]),
                RelationKind(record["kind"]),
                salient=bool(record.get("salient", True)),
                channel=Channel(record["channel"]) if record.get("channel") else None,
                via=record.get("via", []),
                annotation=record.get("annotation"),
            )
        for record in document.get("merges", []):
            model.add_merge(record["id"], [port(p) for p in record["inputs"]], port(record["output"]))
    except (AttributeError, KeyError, TypeError, ValueError) as e:
        raise IrvoError(f"malformed irvo-json document: {e}") from None
    return model


def _encoding_diagnostic(data: bytes, error: UnicodeDecodeError) -> ParseDiagnostic:
    before = data[:error.start]
    line = before.count(b"\n") + 1
    column = error.start - (before.rfind(b"\n") + 1) + 1
    return ParseDiagnostic(
        span=SourceSpan(line=line, column=column, length=max(error.end - error.start, 1)),
        code="E-ENCODING",
        message=f"invalid UTF-8 byte 0x{data[error.start]:02x}",
    )


def load_model(path: Path, parser: Optional[IrvoParser] = None) -> IrvoModel:
    """Read a `.irvo` file, or an irvo-json/1 file when the suffix is .json."""
    path = Path(path)
    data = path.read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise IrvoParseError(str(path), [_encoding_diagnostic(data, e)]) from None
    if path.suffix.lower() == ".json":
        return from_json(text)
    result = (parser or IrvoParser()).parse(text)
    if not result.ok:
        raise IrvoParseError(str(path), result.errors)
    for warning in result.warnings:
        logger.warning(f"{path}:{warning}")
    return result.model
