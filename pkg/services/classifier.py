"""
Interaction-style classification from tool/object world cases.
"""

import json
import logging
from enum import Enum
from pathlib import Path
from typing import Iterable, List, Optional, Set

from pydantic import BaseModel, ConfigDict

from services.irvo_model import EntityKind, IrvoModel, RelationKind, World

logger = logging.getLogger(__name__)

DEFAULT_DEVICE_PROFILES = ("mouse", "keyboard", "screen")


class CaseKind(str, Enum):
    TR_OR = "TrOr"
    TR_OV = "TrOv"
    TV_OR = "TvOr"
    TV_OV = "TvOv"

    @classmethod
    def of(cls, tool_world: World, object_world: World) -> "CaseKind":
        tool = "Tr" if tool_world == World.REAL else "Tv"
        obj = "Or" if object_world == World.REAL else "Ov"
        return cls(tool + obj)

    @property
    def real_object(self) -> bool:
        return self.value.endswith("Or")


class StyleLabel(str, Enum):
    WIMP = "WIMP"
    VR = "VR"
    AR = "AR"
    AV = "AV"
    MR = "MR"


class InteractionCase(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: CaseKind
    tool_mixed: bool = False
    object_mixed: bool = False

    def __str__(self) -> str:
        flags = [name for name, on in (("tool_mixed", self.tool_mixed), ("object_mixed", self.object_mixed)) if on]
        return self.kind.value + (f" ({', '.join(flags)})" if flags else "")


class Classification(BaseModel):
    label: StyleLabel
    cases: List[InteractionCase]
    standard_only: bool

    def to_json(self) -> str:
        return json.dumps({
            "label": self.label.value,
            "cases": [case.model_dump(mode="json") for case in self.cases],
            "standard_only": self.standard_only,
        }, indent=2)


def load_device_profiles(path: Path) -> List[str]:
    """One device identifier per line; blank lines and # comments are skipped."""
    profiles = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            profiles.append(line)
    return profiles


def is_standard_device(entity_id: str, profiles: Iterable[str]) -> bool:
    return any(entity_id == entry or entity_id.startswith(f"{entry}_") for entry in profiles)


def _sort_key(case: InteractionCase):
    return case.kind.value, case.tool_mixed, case.object_mixed


def decide(cases: Iterable[InteractionCase], standard_only: bool, has_real_object: bool) -> StyleLabel:
    """Coarse label; MR > AR > AV > VR > WIMP when branches tie."""
    cases = set(cases)
    augmented_reality = any(
        (c.object_mixed and c.kind.real_object) or c.kind == CaseKind.TV_OR for c in cases
    )
    augmented_virtuality = any(
        (c.object_mixed and not c.kind.real_object) or (c.kind == CaseKind.TR_OV and not standard_only)
        for c in cases
    )
    if augmented_reality and augmented_virtuality:
        return StyleLabel.MR
    if augmented_reality:
        return StyleLabel.AR
    if augmented_virtuality:
        return StyleLabel.AV
    if not cases:
        return StyleLabel.AR if has_real_object else StyleLabel.VR
    if all(not c.kind.real_object for c in cases):
        return StyleLabel.WIMP if standard_only else StyleLabel.VR
    return StyleLabel.AR


class InteractionClassifier:
    def __init__(self, profiles: Optional[Iterable[str]] = None):
        self.profiles = list(profiles) if profiles is not None else list(DEFAULT_DEVICE_PROFILES)

    def interaction_cases(self, model: IrvoModel) -> Set[InteractionCase]:
        """Cases of every tool reached from a user's action that acts directly on an object."""
        actions = {}
        for relation in model.relations:
            if relation.kind == RelationKind.ACTION:
                actions.setdefault(relation.source.entity, set()).add(relation.target.entity)

        tools: Set[str] = set()
        frontier = [
            target
            for user in model.users()
            for target in actions.get(user, ())
            if model.entities[target].kind == EntityKind.TOOL
        ]
        while frontier:
            tool = frontier.pop()
            if tool in tools:
                continue
            tools.add(tool)
            frontier.extend(t for t in actions.get(tool, ()) if model.entities[t].kind == EntityKind.TOOL)

        cases = set()
        for tool in tools:
            for target in actions.get(tool, ()):
                if model.entities[target].kind != EntityKind.OBJECT:
                    continue
                cases.add(InteractionCase(
                    kind=CaseKind.of(model.world_of(tool), model.world_of(target)),
                    tool_mixed=model.group_of(tool) is not None,
                    object_mixed=model.group_of(target) is not None,
                ))
        return cases

    def standard_only(self, model: IrvoModel) -> bool:
        devices = [e.id for e in model.entities_of(EntityKind.TOOL) if e.world == World.REAL]
        devices += [e.id for e in model.entities_of(EntityKind.SENSOR, EntityKind.EFFECTOR)]
        return all(is_standard_device(device, self.profiles) for device in devices)

    def classify(self, model: IrvoModel) -> Classification:
        cases = sorted(self.interaction_cases(model), key=_sort_key)
        standard_only = self.standard_only(model)
        has_real_object = any(e.world == World.REAL for e in model.entities_of(EntityKind.OBJECT))
        label = decide(cases, standard_only, has_real_object)
        logger.debug(f"Model '{model.name}' classified as {label.value} from {[str(c) for c in cases]}")
        return Classification(label=label, cases=cases, standard_only=standard_only)


def classify(model: IrvoModel, profiles: Optional[Iterable[str]] = None) -> StyleLabel:
    return InteractionClassifier(profiles).classify(model).label
