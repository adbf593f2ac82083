"""Random document generators shared by the unit and acceptance tests."""

import random

from notebias.corpus import NOTE_SEPARATOR

FUZZ_NAMES = ["Jonathan", "Johnathan", "Johnatan", "Anna", "Ana", "Brett", "Maria",
              "Smith", "Okafor", "Lee", "Nguyen", "Sofia", "Liam"]
FUZZ_PRONOUNS = ["he", "she", "him", "his", "her", "hers", "He", "She", "HIS", "Her", "HERS"]
FUZZ_WORDS = ["patient", "reports", "anxiety", "worry", "sleep", "school", "mother",
              "the", "and", "was", "seen", "today", "pain", "they", "them", "their",
              "person1", "Person", "Monday", "Dr", "herb", "shed", "hiss", "other", "x-ray"]
FUZZ_PUNCT = [" ", " ", " ", ", ", ". ", "? ", "! ", "\n", " (", ") ", "'s ", " \"", "\" ", "; ", "-"]


def fuzz_document(rng: random.Random) -> str:
    notes = []
    for _ in range(rng.randint(1, 3)):
        parts = []
        for _ in range(rng.randint(0, 40)):
            r = rng.random()
            if r < 0.2:
                w = rng.choice(FUZZ_NAMES)
            elif r < 0.45:
                w = rng.choice(FUZZ_PRONOUNS)
            else:
                w = rng.choice(FUZZ_WORDS)
            parts.append(w + rng.choice(FUZZ_PUNCT))
        notes.append("".join(parts).strip())
    return NOTE_SEPARATOR.join(notes)


def fuzz_corpus(n: int, seed: int = 0) -> list[str]:
    rng = random.Random(seed)
    return [fuzz_document(rng) for _ in range(n)]


SENTENCE_WORDS = ["fever", "cough", "rash", "sleep", "worry", "school", "panic", "meds",
                  "appetite", "headache", "the", "and", "of", "is", "was"]


def sentence_document(rng: random.Random, max_sentences: int = 15) -> list[str]:
    """Sentences of a document, each ending in exactly one terminator."""
    out = []
    for _ in range(rng.randint(1, max_sentences)):
        words = [rng.choice(SENTENCE_WORDS) for _ in range(rng.randint(1, 8))]
        words[0] = words[0].capitalize()
        out.append(" ".join(words) + rng.choice(".?!"))
    return out
