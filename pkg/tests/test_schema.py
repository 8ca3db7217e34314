import pytest

from kgforge.schema import (
    NodeType,
    RelationType,
    UnknownRelation,
    canonical_relation_name,
    expected_object_type,
    validate_relation,
)

SUFFIX_PAIRS = [
    ("hassideeffect", "sideeffect"),
    ("haswarning", "warning"),
    ("hascontraindication", "contraindication"),
    ("hasactiveingredient", "activeingredient"),
    ("hasinactiveingredient", "inactiveingredient"),
    ("hasdosageinfo", "dosageinfo"),
    ("hasstorageinfo", "storageinfo"),
    ("hascolor", "color"),
    ("hasshape", "shape"),
]


def test_schema_is_closed():
    assert len(NodeType) == 10
    assert len(RelationType) == 9
    assert {t.value for t in NodeType} == {
        "drug",
        "activeingredient",
        "inactiveingredient",
        "sideeffect",
        "warning",
        "contraindication",
        "dosageinfo",
        "storageinfo",
        "color",
        "shape",
    }


def test_every_relation_starts_at_drug():
    for rel in RelationType:
        assert rel.subject_type is NodeType.DRUG


@pytest.mark.parametrize("relation,object_type", SUFFIX_PAIRS)
def test_object_type_follows_suffix(relation, object_type):
    rel = validate_relation(relation)
    assert expected_object_type(rel).value == object_type
    assert rel.object_type.value == object_type


def test_validate_relation_exact():
    rel = validate_relation("hassideeffect")
    assert rel is RelationType.HAS_SIDE_EFFECT
    assert rel.subject_type is NodeType.DRUG
    assert rel.object_type is NodeType.SIDE_EFFECT


@pytest.mark.parametrize(
    "surface",
    ["has side effect", "has-side-effect", "has_side_effect", "HAS SIDE EFFECT", "  hassideeffect  "],
)
def test_validate_relation_canonicalizes_separators(surface):
    assert validate_relation(surface) is RelationType.HAS_SIDE_EFFECT


def test_validate_relation_rejects_unknown():
    with pytest.raises(UnknownRelation):
        validate_relation("treats")
    with pytest.raises(UnknownRelation):
        validate_relation("")


def test_validate_relation_idempotent():
    for rel in RelationType:
        canonical = canonical_relation_name(rel.value)
        assert canonical == rel.value
        assert validate_relation(canonical) is rel
        assert validate_relation(validate_relation(rel.value).value) is rel
