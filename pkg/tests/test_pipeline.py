import json

from kgforge.extraction import default_template
from kgforge.gateway import LlmClient, LlmConfig, read_generations_jsonl
from kgforge.ingest import Corpus, adopt_local_file, parse_corpus
from kgforge.pipeline import RunPaths, build_stage, extract_stage, vote_stage


def write_leaflet(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def write_script(path, entries):
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, index, text in entries:
            fh.write(json.dumps({"doc_id": doc_id, "generation_index": index, "text": text}) + "\n")
    return str(path)


def setup_corpus(tmp_path, leaflets):
    corpus = Corpus(tmp_path / "corpus")
    for name, text in leaflets.items():
        adopt_local_file(write_leaflet(tmp_path, name, text), corpus)
    parse_corpus(corpus)
    return corpus


def script_for(corpus, triples_per_doc, n=3):
    entries = []
    for doc_id in corpus.records:
        lines = "\n".join(triples_per_doc.get(doc_id.split("-")[0], []))
        for i in range(n):
            entries.append((doc_id, i, lines))
    return entries


def test_extract_vote_build_with_referential_integrity(tmp_path):
    corpus = setup_corpus(tmp_path, {"alpha.txt": "alpha drug words", "beta.txt": "beta drug words"})
    entries = script_for(
        corpus,
        {
            "alpha": ["alpha | hassideeffect | nausea", "alpha | hascolor | white"],
            "beta": ["beta | haswarning | keep cool"],
        },
    )
    script = write_script(tmp_path / "script.jsonl", entries)
    client = LlmClient(LlmConfig(model_name="m", num_generations=3, mock_script=script))
    paths = RunPaths(tmp_path / "runs", "r1")
    summary = extract_stage(corpus, paths, default_template(), client, jobs=2)
    assert summary["extracted"] == 2

    generations = {(g.doc_id, g.generation_index) for g in read_generations_jsonl(paths.generations)}
    with open(paths.triples, encoding="utf-8") as fh:
        for line in fh:
            row = json.loads(line)
            assert (row["doc_id"], row["generation_index"]) in generations

    vote_summary = vote_stage(paths)
    assert vote_summary["voted"] == 3  # every triple is unanimous across 3 generations
    kg, out = build_stage(paths)
    assert kg.edge_count() == 3
    assert out == paths.kg


def test_extract_stage_resumes_without_touching_done_docs(tmp_path):
    corpus = setup_corpus(tmp_path, {"alpha.txt": "alpha words here"})
    entries = script_for(corpus, {"alpha": ["alpha | hascolor | white"]})
    script = write_script(tmp_path / "script.jsonl", entries)
    paths = RunPaths(tmp_path / "runs", "r1")
    client = LlmClient(LlmConfig(model_name="m", num_generations=3, mock_script=script))
    extract_stage(corpus, paths, default_template(), client)
    first_triples = paths.triples.read_bytes()

    # a new document arrives; the old one must not be re-extracted
    adopt_local_file(write_leaflet(tmp_path, "gamma.txt", "gamma words here"), corpus)
    parse_corpus(corpus)
    entries = script_for(corpus, {"alpha": ["SHOULD NOT | appear | anywhere"], "gamma": ["gamma | hasshape | round"]})
    script2 = write_script(tmp_path / "script2.jsonl", entries)
    client2 = LlmClient(LlmConfig(model_name="m", num_generations=3, mock_script=script2))
    summary = extract_stage(corpus, paths, default_template(), client2)
    assert summary["documents"] == 2

    content = paths.triples.read_text(encoding="utf-8")
    assert "SHOULD NOT" not in content
    assert "gamma" in content
    assert first_triples.decode("utf-8").splitlines()[0] in content


def test_failed_document_is_isolated(tmp_path):
    corpus = setup_corpus(tmp_path, {"alpha.txt": "alpha words", "beta.txt": "beta words"})
    alpha_id = next(d for d in corpus.records if d.startswith("alpha"))
    beta_id = next(d for d in corpus.records if d.startswith("beta"))
    # beta gets only 1 of 3 generations: below the usable majority
    entries = [(alpha_id, i, "alpha | hascolor | white") for i in range(3)]
    entries.append((beta_id, 0, "beta | hascolor | blue"))
    script = write_script(tmp_path / "script.jsonl", entries)
    paths = RunPaths(tmp_path / "runs", "r1")
    client = LlmClient(LlmConfig(model_name="m", num_generations=3, mock_script=script))
    summary = extract_stage(corpus, paths, default_template(), client)
    assert summary["extracted"] == 1
    assert summary["failed"] == 1

    docs = {row["doc_id"]: row for row in map(json.loads, open(paths.documents, encoding="utf-8"))}
    assert docs[beta_id]["status"] == "failed"
    assert corpus.records[beta_id].status == "failed"
    assert vote_stage(paths)["voted"] == 1  # alpha only


def test_vote_stage_rewrite_is_deterministic(tmp_path):
    corpus = setup_corpus(tmp_path, {"alpha.txt": "alpha words"})
    entries = script_for(corpus, {"alpha": ["alpha | hassideeffect | nausea", "alpha | hascolor | white"]})
    script = write_script(tmp_path / "script.jsonl", entries)
    paths = RunPaths(tmp_path / "runs", "r1")
    client = LlmClient(LlmConfig(model_name="m", num_generations=3, mock_script=script))
    extract_stage(corpus, paths, default_template(), client)
    vote_stage(paths)
    first = paths.voted.read_bytes()
    vote_stage(paths)
    assert paths.voted.read_bytes() == first
