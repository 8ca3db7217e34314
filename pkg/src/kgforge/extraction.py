"""Prompt construction and triple parsing around the LLM gateway.

One prompt per document per generation, never chunked: the whole leaflet
goes into a single pass so context is preserved. Model output is one
pipe-delimited triple per line; everything else lands in the rejects log.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .gateway import Generation, LlmClient
from .schema import RELATION_NAMES, validate_relation

LEAFLET_PLACEHOLDER = "{{LEAFLET_TEXT}}"
EXAMPLES_PLACEHOLDER = "{{EXAMPLES}}"

DEFAULT_OUTPUT_FORMAT_NOTE = (
    "Output one triple per line, formatted exactly as: subject | relation | object\n"
    "Do not number the lines, do not add commentary, and do not use any other separator."
)

DEFAULT_EXAMPLES = [
    ("paracetamol 500mg tablets", "hassideeffect", "nausea"),
    ("paracetamol 500mg tablets", "haswarning", "do not exceed the stated dose"),
    ("paracetamol 500mg tablets", "hasactiveingredient", "paracetamol"),
]

# characters trimmed from triple field edges, besides whitespace
_FIELD_QUOTES = "\"'`“”‘’"


@dataclass(frozen=True)
class PromptTemplate:
    instruction: str
    in_context_examples: list = field(default_factory=lambda: list(DEFAULT_EXAMPLES))
    target_attributes: list = field(default_factory=lambda: list(RELATION_NAMES))
    output_format_note: str = DEFAULT_OUTPUT_FORMAT_NOTE

    def __post_init__(self):
        if not self.in_context_examples:
            raise ValueError("in_context_examples must be non-empty")
        for _, relation, _ in self.in_context_examples:
            validate_relation(relation)


@dataclass(frozen=True)
class RawTriple:
    subject: str
    relation: str
    object: str
    doc_id: str
    generation_index: int

    def __post_init__(self):
        if not (self.subject.strip() and self.relation.strip() and self.object.strip()):
            raise ValueError("triple fields must be non-empty")


@dataclass(frozen=True)
class ParseReject:
    doc_id: str
    generation_index: int
    line: str
    reason: str


@dataclass
class ExtractionResult:
    doc_id: str
    generations: list
    triples: list
    rejects: list
    empty_generation_indices: list


def default_template() -> PromptTemplate:
    """The shipped template file with the default exemplar set."""
    text = resources.files("kgforge.templates").joinpath("extract.txt").read_text(encoding="utf-8")
    return PromptTemplate(instruction=text)


def load_template(path: Path) -> PromptTemplate:
    """Load a user-edited template skeleton.

    The file must contain the {{LEAFLET_TEXT}} and {{EXAMPLES}}
    placeholders; exemplars stay the default set unless callers replace
    them on the returned template.
    """
    text = Path(path).read_text(encoding="utf-8")
    for placeholder in (LEAFLET_PLACEHOLDER, EXAMPLES_PLACEHOLDER):
        if placeholder not in text:
            raise ValueError(f"template {path} is missing the {placeholder} placeholder")
    return PromptTemplate(instruction=text)


def render_examples(examples: list) -> str:
    return "\n".join(f"{s} | {r} | {o}" for s, r, o in examples)


def build_prompt(template: PromptTemplate, leaflet_text: str) -> str:
    """Assemble the extraction prompt for one whole leaflet.

    Skeleton instructions (with placeholders) are rendered in place;
    otherwise the sections are appended in a fixed order: instruction,
    allowed relations, output format, exemplars, leaflet text.
    """
    if not leaflet_text:
        raise ValueError("leaflet_text must be non-empty")
    examples = render_examples(template.in_context_examples)
    if LEAFLET_PLACEHOLDER in template.instruction:
        return template.instruction.replace(EXAMPLES_PLACEHOLDER, examples).replace(
            LEAFLET_PLACEHOLDER, leaflet_text
        )
    return "\n\n".join(
        [
            template.instruction,
            "Allowed relations: " + ", ".join(template.target_attributes),
            template.output_format_note,
            "Examples:\n" + examples,
            "Leaflet text:\n" + leaflet_text,
        ]
    )


def _trim_field(raw: str) -> str:
    out, prev = raw, None
    while out != prev:
        prev = out
        out = out.strip().strip(_FIELD_QUOTES)
    return out


def parse_generation(gen: Generation) -> tuple[list[RawTriple], list[ParseReject]]:
    """Parse one generation's raw text into triples plus reject records.

    A valid line has exactly two pipe separators; anything else non-blank
    becomes a reject with a reason, never a silent drop. Pure function of
    the raw text.
    """
    triples: list[RawTriple] = []
    rejects: list[ParseReject] = []
    for line in gen.raw_text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        parts = stripped.split("|")
        if len(parts) != 3:
            rejects.append(
                ParseReject(
                    doc_id=gen.doc_id,
                    generation_index=gen.generation_index,
                    line=stripped,
                    reason=f"expected 2 pipe separators, found {len(parts) - 1}",
                )
            )
            continue
        subject, relation, obj = (_trim_field(p) for p in parts)
        if not (subject and relation and obj):
            rejects.append(
                ParseReject(
                    doc_id=gen.doc_id,
                    generation_index=gen.generation_index,
                    line=stripped,
                    reason="empty field after trimming",
                )
            )
            continue
        triples.append(
            RawTriple(
                subject=subject,
                relation=relation,
                object=obj,
                doc_id=gen.doc_id,
                generation_index=gen.generation_index,
            )
        )
    return triples, rejects


def extract_document(record, template: PromptTemplate, client: LlmClient) -> ExtractionResult:
    """Run all generations for one parsed document and parse the output.

    Gateway errors (overflow, too few usable generations) propagate; the
    caller marks the document failed. On success the record advances to
    extraction_done. Records that are already extraction_done may be
    re-extracted (a fresh run over an existing corpus).
    """
    if record.status not in ("parsed", "extraction_done"):
        raise ValueError(f"{record.doc_id}: expected status 'parsed', got {record.status!r}")
    prompt = build_prompt(template, record.text)
    generations = client.complete_n(prompt, record.doc_id)

    triples: list[RawTriple] = []
    rejects: list[ParseReject] = []
    empty: list[int] = []
    for gen in generations:
        gen_triples, gen_rejects = parse_generation(gen)
        if not gen_triples:
            empty.append(gen.generation_index)
        triples.extend(gen_triples)
        rejects.extend(gen_rejects)
    record.advance("extraction_done")
    return ExtractionResult(
        doc_id=record.doc_id,
        generations=generations,
        triples=triples,
        rejects=rejects,
        empty_generation_indices=empty,
    )
