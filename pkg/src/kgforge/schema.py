"""Fixed graph schema: node types, relation types, and triple validation.

The vocabulary is closed-world: ten node types, nine relations, and every
relation points from a drug to the node type named by its suffix.
"""

from __future__ import annotations

import enum
import re


class NodeType(enum.Enum):
    DRUG = "drug"
    ACTIVE_INGREDIENT = "activeingredient"
    INACTIVE_INGREDIENT = "inactiveingredient"
    SIDE_EFFECT = "sideeffect"
    WARNING = "warning"
    CONTRAINDICATION = "contraindication"
    DOSAGE_INFO = "dosageinfo"
    STORAGE_INFO = "storageinfo"
    COLOR = "color"
    SHAPE = "shape"

    def __str__(self) -> str:
        return self.value


class RelationType(enum.Enum):
    HAS_SIDE_EFFECT = "hassideeffect"
    HAS_WARNING = "haswarning"
    HAS_CONTRAINDICATION = "hascontraindication"
    HAS_ACTIVE_INGREDIENT = "hasactiveingredient"
    HAS_INACTIVE_INGREDIENT = "hasinactiveingredient"
    HAS_DOSAGE_INFO = "hasdosageinfo"
    HAS_STORAGE_INFO = "hasstorageinfo"
    HAS_COLOR = "hascolor"
    HAS_SHAPE = "hasshape"

    def __str__(self) -> str:
        return self.value

    @property
    def subject_type(self) -> NodeType:
        return NodeType.DRUG

    @property
    def object_type(self) -> NodeType:
        return _OBJECT_TYPES[self]


_OBJECT_TYPES = {
    RelationType.HAS_SIDE_EFFECT: NodeType.SIDE_EFFECT,
    RelationType.HAS_WARNING: NodeType.WARNING,
    RelationType.HAS_CONTRAINDICATION: NodeType.CONTRAINDICATION,
    RelationType.HAS_ACTIVE_INGREDIENT: NodeType.ACTIVE_INGREDIENT,
    RelationType.HAS_INACTIVE_INGREDIENT: NodeType.INACTIVE_INGREDIENT,
    RelationType.HAS_DOSAGE_INFO: NodeType.DOSAGE_INFO,
    RelationType.HAS_STORAGE_INFO: NodeType.STORAGE_INFO,
    RelationType.HAS_COLOR: NodeType.COLOR,
    RelationType.HAS_SHAPE: NodeType.SHAPE,
}

RELATION_NAMES = [r.value for r in RelationType]

# separators LLM output tends to sprinkle into relation names
_SEPARATORS = re.compile(r"[\s\-_]+")


class UnknownRelation(ValueError):
    """Relation name matches none of the nine relations after canonicalization."""

    def __init__(self, name: str):
        super().__init__(f"unknown relation: {name!r}")
        self.name = name


def canonical_relation_name(name: str) -> str:
    """Lowercase and strip internal whitespace, hyphens, and underscores."""
    return _SEPARATORS.sub("", name.strip().lower())


def validate_relation(name: str) -> RelationType:
    """Resolve a relation name to its RelationType.

    Raises UnknownRelation when the canonicalized name is not one of the
    nine relations; callers must log the offending triple as a reject,
    never drop it silently.
    """
    canonical = canonical_relation_name(name)
    try:
        return RelationType(canonical)
    except ValueError:
        raise UnknownRelation(name) from None


def expected_object_type(rel: RelationType) -> NodeType:
    """Object node type implied by the relation (total over all nine)."""
    return _OBJECT_TYPES[rel]
