import json
import random

import pytest

from notesum.annotation import I2B2_CHANNEL, UMLS_CHANNEL, TermDictionary

UMLS_TERMS = [
    "heart failure",
    "cpap",
    "anemia",
    "renal failure",
    "sat drifts",
    "atrial fibrillation",
    "copd",
    "hypertension",
    "pneumonia",
    "sepsis",
    "diabetes mellitus",
    "pleural effusion",
    "acute kidney injury",
    "chest pain",
    "shortness of breath",
]

I2B2_TERMS = [
    "cpap",
    "lasix",
    "metoprolol",
    "insulin",
    "heparin",
    "vancomycin",
    "dyspnea",
    "edema",
    "fever",
    "cough",
    "hypoxia",
    "tachycardia",
]

FILLER_WORDS = (
    "pt remains stable overnight on current regimen with improving labs and "
    "no acute events noted plan continue monitoring wean oxygen as tolerated "
    "follow up imaging pending family updated will reassess in am"
).split()


@pytest.fixture(scope="session")
def umls_dict():
    return TermDictionary(UMLS_TERMS, UMLS_CHANNEL)


@pytest.fixture(scope="session")
def i2b2_dict():
    return TermDictionary(I2B2_TERMS, I2B2_CHANNEL)


def make_sentence(rng: random.Random, umls_p=0.5, i2b2_p=0.3) -> str:
    words = [rng.choice(FILLER_WORDS) for _ in range(rng.randint(5, 12))]
    if rng.random() < umls_p:
        words.insert(rng.randrange(len(words) + 1), rng.choice(UMLS_TERMS))
    if rng.random() < i2b2_p:
        words.insert(rng.randrange(len(words) + 1), rng.choice(I2B2_TERMS))
    return " ".join(words) + " ."


def make_note_text(rng: random.Random, n_sentences=None, umls_p=0.5, i2b2_p=0.3) -> str:
    n = n_sentences if n_sentences is not None else rng.randint(2, 8)
    sentences = [make_sentence(rng, umls_p, i2b2_p) for _ in range(n)]
    parts = [sentences[0]]
    for sent in sentences[1:]:
        parts.append(rng.choice([" ", "  ", "\n", "\n\n", " \n"]))
        parts.append(sent)
    return "".join(parts)


def write_note_file(path, notes):
    with open(path, "w", encoding="utf-8") as fh:
        for note in notes:
            fh.write(json.dumps(note))
            fh.write("\n")
    return path


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path
