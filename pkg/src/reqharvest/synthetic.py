"""Deterministic synthetic corpora of requirement and descriptive sentences.

Requirements are built around modal verbs ("shall", "must", ...), the other
sentences describe, summarize or narrate. Each document draws on its own
domain vocabulary, so a document-disjoint test fold contains words that were
never seen in training.
"""

from __future__ import annotations

import random
from importlib import resources

from .corpus import Label, LabeledDataset, SentenceUnit, load_dataset

DOMAINS = [
    ("billing", ["invoice", "payment", "refund", "tariff", "ledger entry"]),
    ("library", ["catalogue record", "loan", "reservation", "borrower account", "overdue notice"]),
    ("telemetry", ["sensor reading", "satellite packet", "ground station", "downlink frame", "orbit report"]),
    ("clinic", ["patient record", "appointment", "prescription", "lab result", "referral"]),
    ("logistics", ["shipment", "pallet label", "delivery route", "warehouse slot", "customs form"]),
    ("elections", ["ballot", "voter roll", "polling station", "tally sheet", "candidate list"]),
    ("traffic", ["signal plan", "camera feed", "incident ticket", "lane closure", "speed sensor"]),
    ("museum", ["exhibit label", "visitor badge", "audio guide", "artifact scan", "gallery map"]),
    ("farming", ["irrigation schedule", "soil sample", "harvest batch", "weather alert", "field plot"]),
    ("payroll", ["timesheet", "salary slip", "tax code", "overtime claim", "pension record"]),
]

ACTORS = ["The system", "The application", "The server", "The operator console", "The web portal",
          "The mobile client", "Each user", "The administrator", "The software", "The service"]
MODALS = ["shall", "must", "should", "will", "is required to", "shall be able to"]
ACTIONS = ["store", "validate", "encrypt", "export", "display", "archive", "log", "update",
           "delete", "synchronize", "print", "notify the owner of", "restrict access to", "back up"]
CONDITIONS = ["within two seconds", "at rest", "on every request", "before midnight", "without data loss",
              "for at least seven years", "in under one minute", "whenever it changes",
              "using TLS", "for authorized staff only"]

OPENERS = ["This section describes", "The following chapter presents", "Figure 3 illustrates",
           "The previous release introduced", "Historically, the team handled", "This document summarizes",
           "The appendix lists", "Table 2 compares", "The glossary defines", "In the pilot, staff reviewed"]
TOPICS = ["the overall architecture of", "the context around", "several examples of", "the history of",
          "the main stakeholders of", "a typical day with", "the data model behind", "known issues with",
          "the terminology used for", "the rationale behind"]
TAILS = ["in more detail", "for new readers", "as background", "from the 2019 audit", "for reference",
         "as shown below", "in plain terms", "at a high level", "for the steering group", "informally"]


def _requirement(rng: random.Random, objects: list[str]) -> str:
    return (f"{rng.choice(ACTORS)} {rng.choice(MODALS)} {rng.choice(ACTIONS)} "
            f"the {rng.choice(objects)} {rng.choice(CONDITIONS)}.")


def _description(rng: random.Random, objects: list[str], domain: str) -> str:
    return (f"{rng.choice(OPENERS)} {rng.choice(TOPICS)} the {rng.choice(objects)} "
            f"in the {domain} domain {rng.choice(TAILS)}.")


def generate_corpus(
    n_documents: int = 10, per_class_per_document: int = 20, seed: int = 2021, prefix: str = "synth"
) -> LabeledDataset:
    """Balanced corpus; the default is 400 sentences over 10 documents."""
    rng = random.Random(seed)
    units = []
    for d in range(n_documents):
        domain, objects = DOMAINS[d % len(DOMAINS)]
        doc_id = f"{prefix}-{d:02d}-{domain}"
        seen: set[str] = set()
        sentences = []
        for label, make in ((Label.REQUIREMENT, lambda: _requirement(rng, objects)),
                            (Label.NON_REQUIREMENT, lambda: _description(rng, objects, domain))):
            made = 0
            while made < per_class_per_document:
                text = make()
                if text not in seen:
                    seen.add(text)
                    sentences.append((text, label))
                    made += 1
        rng.shuffle(sentences)
        units.extend(SentenceUnit(f"{doc_id}#{n}", doc_id, text, label)
                     for n, (text, label) in enumerate(sentences))
    return LabeledDataset(tuple(units))


def toy_corpus(seed: int = 7) -> LabeledDataset:
    """100 sentences: 50 "shall" requirements and 50 descriptive sentences in 10 documents."""
    rng = random.Random(seed)
    units = []
    for d in range(10):
        domain, objects = DOMAINS[d]
        doc_id = f"toy-{d}"
        for n in range(10):
            if n % 2 == 0:
                text = f"The system shall {rng.choice(ACTIONS)} the {rng.choice(objects)} {rng.choice(CONDITIONS)}."
                label = Label.REQUIREMENT
            else:
                text = _description(rng, objects, domain)
                label = Label.NON_REQUIREMENT
            units.append(SentenceUnit(f"{doc_id}#{n}", doc_id, text, label))
    return LabeledDataset(tuple(units))


def bundled_corpus_path():
    return resources.files("reqharvest").joinpath("data/synthetic_corpus.jsonl")


def load_bundled_corpus() -> LabeledDataset:
    with resources.as_file(bundled_corpus_path()) as path:
        return load_dataset(path)
