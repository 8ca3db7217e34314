import random
from collections import Counter

import pytest

from kgforge.extraction import RawTriple
from kgforge.schema import UnknownRelation, validate_relation
from kgforge.voting import (
    EmptyAfterNormalization,
    count_votes,
    filter_by_confidence,
    normalize_text,
    read_voted_csv,
    vote_generations,
    write_voted_csv,
)

from conftest import make_voted


def raw(subject, relation, obj, gen, doc="doc-1"):
    return RawTriple(subject=subject, relation=relation, object=obj, doc_id=doc, generation_index=gen)


class TestNormalize:
    def test_lowercases(self):
        assert normalize_text("Toltertan SR") == "toltertan sr"

    def test_collapses_whitespace(self):
        assert normalize_text("  Dry   Mouth ") == "dry mouth"

    def test_strips_quotes(self):
        assert normalize_text('"nausea"') == "nausea"
        assert normalize_text(" '“nausea”' ") == "nausea"

    def test_nfc(self):
        # e + combining acute composes to a single code point
        assert normalize_text("café") == "café"

    def test_empty_after_normalization(self):
        with pytest.raises(EmptyAfterNormalization):
            normalize_text(' "" ')

    def test_idempotent(self):
        for s in ["Toltertan SR", "  Dry   Mouth ", '"nausea"']:
            once = normalize_text(s)
            assert normalize_text(once) == once


def naive_recount(triples, runs):
    """Independent set-per-generation oracle for count_votes."""
    per_gen = {}
    for t in triples:
        key = (normalize_text(t.subject), validate_relation(t.relation), normalize_text(t.object))
        per_gen.setdefault(t.generation_index, set()).add(key)
    freq = Counter()
    for keys in per_gen.values():
        freq.update(keys)
    return {key: (count, count / runs) for key, count in freq.items()}


class TestCountVotes:
    def test_three_of_five(self):
        triples = [raw("alphadol", "hassideeffect", "nausea", g) for g in (0, 1, 2)]
        [voted] = count_votes(triples, runs=5)
        assert voted.frequency == 3
        assert voted.confidence == 3 / 5
        assert voted.confidence == 0.6

    def test_unanimous(self):
        triples = [raw("alphadol", "hascolor", "white", g) for g in range(5)]
        [voted] = count_votes(triples, runs=5)
        assert voted.confidence == 1.0

    def test_case_variants_merge_before_counting(self):
        triples = [
            raw("alphadol", "hassideeffect", "Nausea", 0),
            raw("alphadol", "hassideeffect", "nausea", 1),
            raw("alphadol", "hassideeffect", "nausea", 2),
        ]
        voted = count_votes(triples, runs=5)
        assert len(voted) == 1
        assert voted[0].object == "nausea"
        assert voted[0].frequency == 3
        oracle = naive_recount(triples, 5)
        assert oracle[("alphadol", voted[0].relation, "nausea")] == (3, 0.6)

    def test_within_generation_duplicates_count_once(self):
        triples = [
            raw("a", "hascolor", "white", 0),
            raw("a", "hascolor", "white", 0),
            raw("a", "hascolor", " White ", 0),
        ]
        [voted] = count_votes(triples, runs=5)
        assert voted.frequency == 1

    def test_permutation_invariant(self):
        rng = random.Random(13)
        triples = [
            raw("a", "hassideeffect", "nausea", 0),
            raw("a", "hassideeffect", "nausea", 2),
            raw("a", "hascolor", "white", 1),
            raw("a", "haswarning", "do not drive", 2),
        ]
        expected = count_votes(triples, runs=3)
        for _ in range(5):
            rng.shuffle(triples)
            assert count_votes(triples, runs=3) == expected

    def test_single_generation_degenerates(self):
        [voted] = count_votes([raw("a", "hascolor", "white", 0)], runs=1)
        assert voted.confidence == 1.0

    def test_mixed_documents_rejected(self):
        with pytest.raises(ValueError):
            count_votes([raw("a", "hascolor", "white", 0), raw("a", "hascolor", "white", 0, doc="doc-2")], runs=5)

    def test_unknown_relation_raises(self):
        with pytest.raises(UnknownRelation):
            count_votes([raw("a", "treats", "pain", 0)], runs=5)

    def test_empty_input(self):
        assert count_votes([], runs=5) == []

    def test_normalize_after_vote_splits_surface_variants(self):
        # “Nausea” twice and “nausea” three times: normalize-first sees 5/5,
        # the literal order sees max(2, 3)/5 after merging survivors.
        triples = [raw("a", "hassideeffect", "Nausea", g) for g in (0, 1)] + [
            raw("a", "hassideeffect", "nausea", g) for g in (2, 3, 4)
        ]
        [first] = count_votes(triples, runs=5)
        assert first.frequency == 5
        [literal] = count_votes(triples, runs=5, normalize_after_vote=True)
        assert literal.frequency == 3
        assert literal.object == "nausea"


class TestVoteOracle:
    def test_random_fixtures_match_naive_recount(self):
        rng = random.Random(20260810)
        subjects = ["alphadol", "Alphadol ", "betrixan", "CORMIVA"]
        relations = ["hassideeffect", "has side effect", "hascolor", "haswarning", "hasdosageinfo"]
        objects = ["nausea", " Nausea", "white", '"white"', "dry  mouth", "do not drive", "one daily"]
        for _ in range(200):
            runs = rng.randint(1, 5)
            triples = [
                raw(rng.choice(subjects), rng.choice(relations), rng.choice(objects), rng.randrange(runs))
                for _ in range(rng.randint(0, 50))
            ]
            voted = count_votes(triples, runs=runs)
            oracle = naive_recount(triples, runs)
            assert len(voted) == len(oracle)
            for v in voted:
                frequency, confidence = oracle[(v.subject, v.relation, v.object)]
                assert v.frequency == frequency
                assert v.confidence == confidence
                assert 1 <= v.frequency <= runs


class TestFilter:
    def test_inclusive_threshold(self):
        kept = filter_by_confidence(
            [
                make_voted("a", "hassideeffect", "x", 3, 5, "d"),
                make_voted("a", "hassideeffect", "y", 2, 5, "d"),
                make_voted("a", "hassideeffect", "z", 2, 4, "d"),
            ]
        )
        assert [(v.object, v.confidence) for v in kept] == [("x", 0.6), ("z", 0.5)]

    def test_majority_rule_five_runs(self):
        voted = [make_voted("a", "hascolor", f"c{f}", f, 5, "d") for f in range(1, 6)]
        kept = filter_by_confidence(voted, 0.5)
        assert {v.frequency for v in kept} == {3, 4, 5}

    def test_sorted_output(self):
        kept = filter_by_confidence(
            [
                make_voted("b", "hascolor", "white", 5, 5, "d"),
                make_voted("a", "hasshape", "round", 5, 5, "d"),
                make_voted("a", "hascolor", "white", 5, 5, "d"),
            ]
        )
        assert [v.key() for v in kept] == sorted(v.key() for v in kept)

    def test_threshold_bounds(self):
        with pytest.raises(ValueError):
            filter_by_confidence([], threshold=0.0)
        with pytest.raises(ValueError):
            filter_by_confidence([], threshold=1.5)


class TestVoteGenerations:
    def test_rejects_do_not_vote(self):
        triples = [
            raw("a", "hassideeffect", "nausea", 0),
            raw("a", "treats", "pain", 0),
            raw("a", "hassideeffect", '""', 1),
        ]
        voted, rejects = vote_generations(triples, runs=5)
        assert len(voted) == 1
        assert sorted(r.reason for r in rejects) == ["empty_after_normalization", "unknown_relation"]


def test_voted_csv_round_trip(tmp_path):
    voted = [
        make_voted("alphadol", "hassideeffect", "nausea", 3, 5, "doc-1"),
        make_voted("betrixan", "hascolor", "blue, pale", 5, 5, "doc-2"),
    ]
    path = tmp_path / "voted.csv"
    write_voted_csv(path, voted)
    assert read_voted_csv(path) == sorted(voted, key=lambda v: (v.doc_id,) + v.key())
    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert header == "doc_id,subject,relation,object,frequency,runs,confidence"
