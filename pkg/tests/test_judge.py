import json

import pytest

from kgforge.evaluation import Label, Source
from kgforge.gateway import LlmClient, LlmConfig
from kgforge.judge import (
    DEFAULT_JUDGE_EXAMPLES,
    JudgePrompt,
    default_judge_skeleton,
    judge_corpus,
    judge_document,
    parse_judge_response,
)
from kgforge.ingest import DocumentRecord

from conftest import make_voted


def make_doc(doc_id="doc-1", text="Somnolence is a common side effect. The capsule is blue."):
    record = DocumentRecord(doc_id=doc_id, content_hash="0" * 64, fetched_at="t")
    record.status = "parsed"
    record.text = text
    return record


def triples_for(doc_id, n=3):
    objs = ["somnolence", "blue", "gelatin"]
    rels = ["hassideeffect", "hascolor", "hasinactiveingredient"]
    return [make_voted("zitrease", rels[i], objs[i], 5, 5, doc_id) for i in range(n)]


def judge_client(tmp_path, entries, n=1):
    path = tmp_path / "judge_script.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, index, text in entries:
            fh.write(json.dumps({"doc_id": doc_id, "generation_index": index, "text": text}) + "\n")
    return LlmClient(LlmConfig(model_name="judge", num_generations=n, mock_script=str(path)))


class TestJudgePrompt:
    def test_examples_cover_three_labels(self):
        labels = {label for _, label, _ in DEFAULT_JUDGE_EXAMPLES}
        assert labels == set(Label)

    def test_missing_label_rejected(self):
        with pytest.raises(ValueError):
            JudgePrompt(
                leaflet_text="x",
                triples=tuple(triples_for("d")),
                in_context_examples=(DEFAULT_JUDGE_EXAMPLES[0],),
            )

    def test_render_contains_all_parts(self):
        triples = triples_for("doc-1")
        prompt = JudgePrompt(leaflet_text="THE LEAFLET BODY", triples=tuple(triples)).render()
        assert "THE LEAFLET BODY" in prompt
        for i, t in enumerate(triples, start=1):
            assert f"{i}. {t.subject} | {t.relation.value} | {t.object}" in prompt
        assert "correct" in prompt and "incorrect" in prompt and "partially_correct" in prompt
        assert "{{" not in prompt

    def test_default_skeleton_has_placeholders(self):
        skeleton = default_judge_skeleton()
        for ph in ("{{LEAFLET_TEXT}}", "{{TRIPLES}}", "{{EXAMPLES}}"):
            assert ph in skeleton


class TestParseResponse:
    def test_happy_lines(self):
        triples = triples_for("doc-1")
        verdicts, notes = parse_judge_response(
            "1 | correct | somnolence is a common side effect\n"
            "2 | incorrect | leaflet says white\n"
            "3 | partially correct | leaflet lists gelatin capsule shell",
            triples,
            "doc-1",
        )
        assert notes == []
        assert verdicts[1].label is Label.CORRECT
        assert verdicts[2].label is Label.INCORRECT
        assert verdicts[3].label is Label.PARTIALLY_CORRECT
        assert verdicts[1].source is Source.LLM_JUDGE

    def test_bad_lines_noted_not_guessed(self):
        triples = triples_for("doc-1")
        verdicts, notes = parse_judge_response(
            "thinking out loud\n1 | maybe | hmm\nx | correct | ok\n9 | correct | range\n1 | correct | fine",
            triples,
            "doc-1",
        )
        assert list(verdicts) == [1]
        assert len(notes) == 4

    def test_duplicate_index_keeps_first(self):
        triples = triples_for("doc-1")
        verdicts, notes = parse_judge_response("1 | correct | a\n1 | incorrect | b", triples, "doc-1")
        assert verdicts[1].label is Label.CORRECT
        assert any("duplicate" in n for n in notes)


class TestJudgeDocument:
    def test_scripted_verdicts_match_script(self, tmp_path):
        doc = make_doc()
        triples = triples_for(doc.doc_id)
        client = judge_client(
            tmp_path,
            [(doc.doc_id, 0, "1 | correct | supported\n2 | correct | stated\n3 | partially_correct | shell")],
        )
        result = judge_document(doc, triples, client)
        assert [v.label for v in result.verdicts] == [Label.CORRECT, Label.CORRECT, Label.PARTIALLY_CORRECT]
        assert result.missing == []
        assert [v.triple_key[:3] for v in result.verdicts] == [
            (t.subject, t.relation.value, t.object) for t in triples
        ]

    def test_missing_line_retried_then_reported(self, tmp_path):
        doc = make_doc()
        triples = triples_for(doc.doc_id)
        client = judge_client(
            tmp_path,
            [
                (doc.doc_id, 0, "1 | correct | fine"),
                (doc.doc_id, 1, "2 | incorrect | not stated"),
            ],
        )
        result = judge_document(doc, triples, client)
        assert sorted(v.triple_key[1] for v in result.verdicts) == ["hascolor", "hassideeffect"]
        assert len(result.missing) == 1
        assert result.missing[0][2] == "gelatin"

    def test_retry_unavailable_is_tolerated(self, tmp_path):
        doc = make_doc()
        triples = triples_for(doc.doc_id)
        client = judge_client(tmp_path, [(doc.doc_id, 0, "1 | correct | fine")])
        result = judge_document(doc, triples, client)
        assert len(result.verdicts) == 1
        assert len(result.missing) == 2

    def test_foreign_triples_rejected(self, tmp_path):
        doc = make_doc("doc-1")
        client = judge_client(tmp_path, [("doc-1", 0, "1 | correct | x")])
        with pytest.raises(ValueError):
            judge_document(doc, triples_for("doc-2"), client)

    def test_empty_triples_short_circuit(self, tmp_path):
        doc = make_doc()
        client = judge_client(tmp_path, [])
        result = judge_document(doc, [], client)
        assert result.verdicts == [] and result.missing == []


class TestJudgeCorpus:
    def make_run(self, tmp_path, voted_rows):
        from kgforge.voting import write_voted_csv

        run_dir = tmp_path / "runs" / "r1"
        run_dir.mkdir(parents=True)
        write_voted_csv(run_dir / "voted.csv", voted_rows)
        return run_dir

    def make_corpus(self, tmp_path, docs):
        from kgforge.ingest import Corpus

        corpus = Corpus(tmp_path / "corpus")
        corpus.ensure_dirs()
        for doc_id, text in docs.items():
            record = DocumentRecord(doc_id=doc_id, content_hash="0" * 64, fetched_at="t")
            record.status = "parsed"
            corpus.text_path(record).write_text(text, encoding="utf-8")
            record.word_count = len(text.split())
            corpus.add(record)
        corpus.save()
        return corpus

    def test_judges_run_and_persists(self, tmp_path):
        voted = triples_for("doc-1") + triples_for("doc-2")
        run_dir = self.make_run(tmp_path, voted)
        corpus = self.make_corpus(tmp_path, {"doc-1": "text one", "doc-2": "text two"})
        client = judge_client(
            tmp_path,
            [
                ("doc-1", 0, "1 | correct | a\n2 | correct | b\n3 | correct | c"),
                ("doc-2", 0, "1 | correct | a\n2 | incorrect | b\n3 | partially_correct | c"),
            ],
        )
        summary = judge_corpus(run_dir, corpus, client)
        assert summary.report.total == 6
        assert summary.report.counts[Label.CORRECT] == 4
        assert summary.completion == 1.0
        assert (run_dir / "judge_verdicts.csv").exists()
        report = json.loads((run_dir / "judge_report.json").read_text(encoding="utf-8"))
        assert report["total"] == 6
        assert report["counts"]["correct"] == 4

    def test_document_failure_flags_completion(self, tmp_path):
        voted = triples_for("doc-1") + triples_for("doc-2")
        run_dir = self.make_run(tmp_path, voted)
        corpus = self.make_corpus(tmp_path, {"doc-1": "text one", "doc-2": "text two"})
        client = judge_client(tmp_path, [("doc-1", 0, "1 | correct | a\n2 | correct | b\n3 | correct | c")])
        summary = judge_corpus(run_dir, corpus, client)
        assert summary.completion == 0.5
        assert summary.failed_docs == ["doc-2"]
        assert summary.report.total == 3

    def test_empty_run_reports_zero_total_error(self, tmp_path):
        run_dir = self.make_run(tmp_path, [])
        corpus = self.make_corpus(tmp_path, {})
        client = judge_client(tmp_path, [])
        summary = judge_corpus(run_dir, corpus, client)
        assert summary.report is None
        assert "zero" in summary.error
        report = json.loads((run_dir / "judge_report.json").read_text(encoding="utf-8"))
        assert report["total"] == 0
        assert report["error"]

    def test_reproducible_byte_for_byte(self, tmp_path):
        voted = triples_for("doc-1")
        run_dir = self.make_run(tmp_path, voted)
        corpus = self.make_corpus(tmp_path, {"doc-1": "text"})
        entries = [("doc-1", 0, "1 | correct | a\n2 | correct | b\n3 | correct | c")]
        judge_corpus(run_dir, corpus, judge_client(tmp_path, entries))
        first = (run_dir / "judge_verdicts.csv").read_bytes()
        judge_corpus(run_dir, corpus, judge_client(tmp_path, entries))
        assert (run_dir / "judge_verdicts.csv").read_bytes() == first
