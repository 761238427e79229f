"""Corpus loading, gold-keyphrase partitioning, and dataset statistics.

Corpora are JSON-lines files: one UTF-8 object per line with keys ``id``,
``title``, ``abstract``, ``keyphrases`` (list of strings) and an optional
``domain`` ("scientific" or "news"). Gold keyphrases are normalized and
split into present/absent against the stemmed title+body token stream.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from . import textnorm

log = logging.getLogger(__name__)

DOMAINS = ("scientific", "news")


class CorpusError(Exception):
    """Fatal problem with a corpus file (unreadable, or no valid records)."""


@dataclass(frozen=True)
class Document:
    id: str
    title: str
    body: str
    gold: tuple[str, ...]
    domain: str = "scientific"

    @property
    def source_text(self) -> str:
        return f"{self.title} {self.body}"


@dataclass(frozen=True)
class GoldPartition:
    present: tuple[textnorm.NormalizedPhrase, ...]
    absent: tuple[textnorm.NormalizedPhrase, ...]


@dataclass(frozen=True)
class CorpusStats:
    num_docs: int
    avg_input_words: float
    avg_words_per_present_kp: float | None
    avg_words_per_absent_kp: float | None
    avg_present_per_doc: float
    avg_absent_per_doc: float


def _parse_record(obj: object, default_domain: str) -> Document:
    if not isinstance(obj, dict):
        raise ValueError("record is not a JSON object")
    for key in ("id", "title", "abstract"):
        if not isinstance(obj.get(key), str):
            raise ValueError(f"missing or non-string field {key!r}")
    if not obj["id"]:
        raise ValueError("empty id")
    kps = obj.get("keyphrases")
    if not isinstance(kps, list) or not all(isinstance(k, str) for k in kps):
        raise ValueError("field 'keyphrases' must be a list of strings")
    domain = obj.get("domain", default_domain)
    if domain not in DOMAINS:
        raise ValueError(f"unknown domain {domain!r}")
    return Document(
        id=obj["id"],
        title=obj["title"],
        body=obj["abstract"],
        gold=tuple(kps),
        domain=domain,
    )


def load_corpus(
    path: str | Path,
    limit: int | None = None,
    default_domain: str = "scientific",
) -> list[Document]:
    """Read documents from a JSON-lines corpus file, in file order.

    Malformed lines and duplicate ids are skipped with a logged warning.
    Raises CorpusError if the file cannot be read or holds no valid record.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus file {path}: {exc}") from exc

    docs: list[Document] = []
    seen_ids: set[str] = set()
    skipped = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = _parse_record(json.loads(line), default_domain)
            if doc.id in seen_ids:
                raise ValueError(f"duplicate id {doc.id!r}")
        except ValueError as exc:
            skipped += 1
            log.warning("%s:%d: skipping malformed record: %s", path, lineno, exc)
            continue
        seen_ids.add(doc.id)
        docs.append(doc)
        if limit is not None and len(docs) >= limit:
            break
    if skipped:
        log.warning("%s: skipped %d malformed record(s)", path, skipped)
    if not docs:
        raise CorpusError(f"no valid records in corpus file {path}")
    return docs


def save_corpus(docs: list[Document], path: str | Path) -> None:
    """Write documents back out in the same JSON-lines format."""
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(
                json.dumps(
                    {
                        "id": d.id,
                        "title": d.title,
                        "abstract": d.body,
                        "keyphrases": list(d.gold),
                        "domain": d.domain,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def partition_gold(doc: Document) -> GoldPartition:
    """Normalize and dedup gold phrases, then split by document presence."""
    source = textnorm.normalize_tokens(doc.source_text)
    phrases = textnorm.dedup_preserve_order(
        [textnorm.normalize_phrase(g) for g in doc.gold]
    )
    present = []
    absent = []
    for p in phrases:
        if textnorm.is_present(p, source):
            present.append(p.classified(True))
        else:
            absent.append(p.classified(False))
    return GoldPartition(present=tuple(present), absent=tuple(absent))


def corpus_stats(docs: list[Document]) -> CorpusStats:
    """Descriptive statistics: input length and gold keyphrase counts.

    Word counts use whitespace splitting of the raw surface text, not the
    stemming tokenizer. Per-keyphrase word averages pool all keyphrases in
    the corpus; per-document averages divide by the document count. When a
    corpus has no present (or absent) keyphrases at all, the corresponding
    words-per-keyphrase average is undefined and reported as None.
    """
    if not docs:
        raise CorpusError("corpus_stats requires at least one document")
    input_words = 0
    present_kp_words = 0
    absent_kp_words = 0
    present_count = 0
    absent_count = 0
    for doc in docs:
        input_words += len(doc.source_text.split())
        part = partition_gold(doc)
        present_count += len(part.present)
        absent_count += len(part.absent)
        present_kp_words += sum(len(p.surface.split()) for p in part.present)
        absent_kp_words += sum(len(p.surface.split()) for p in part.absent)
    n = len(docs)
    return CorpusStats(
        num_docs=n,
        avg_input_words=input_words / n,
        avg_words_per_present_kp=(
            present_kp_words / present_count if present_count else None
        ),
        avg_words_per_absent_kp=(
            absent_kp_words / absent_count if absent_count else None
        ),
        avg_present_per_doc=present_count / n,
        avg_absent_per_doc=absent_count / n,
    )


def format_stats(stats: CorpusStats) -> str:
    """Two-column text table for the stats CLI."""
    def fmt(value: float | None) -> str:
        return "-" if value is None else f"{value:.2f}"

    rows = [
        ("Documents", str(stats.num_docs)),
        ("Avg words in title + body", fmt(stats.avg_input_words)),
        ("Avg words per present keyphrase", fmt(stats.avg_words_per_present_kp)),
        ("Avg words per absent keyphrase", fmt(stats.avg_words_per_absent_kp)),
        ("Avg present keyphrases per doc", fmt(stats.avg_present_per_doc)),
        ("Avg absent keyphrases per doc", fmt(stats.avg_absent_per_doc)),
    ]
    width = max(len(name) for name, _ in rows)
    return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def stats_csv(stats: CorpusStats) -> str:
    """CSV form of the stats table (header + one row)."""
    def fmt(value: float | None) -> str:
        return "" if value is None else f"{value:.6f}"

    header = (
        "num_docs,avg_input_words,avg_words_per_present_kp,"
        "avg_words_per_absent_kp,avg_present_per_doc,avg_absent_per_doc"
    )
    row = ",".join(
        [
            str(stats.num_docs),
            fmt(stats.avg_input_words),
            fmt(stats.avg_words_per_present_kp),
            fmt(stats.avg_words_per_absent_kp),
            fmt(stats.avg_present_per_doc),
            fmt(stats.avg_absent_per_doc),
        ]
    )
    return f"{header}\n{row}\n"
