"""Build a small pre-training corpus end to end and print its statistics.

Also demonstrates that the output is byte-identical regardless of the
worker count, because each document draws from its own seeded substream.
"""

import random
import tempfile
from pathlib import Path

from notesum.annotation import I2B2_CHANNEL, UMLS_CHANNEL, TermDictionary
from notesum.corpus import ProgressNote, build_pretrain_corpus, read_corpus, write_corpus
from notesum.masking import MaskPolicyConfig

UMLS_TERMS = ["heart failure", "cpap", "anemia", "pneumonia", "sepsis", "chest pain"]
I2B2_TERMS = ["lasix", "insulin", "heparin", "fever", "hypoxia", "cpap"]
FILLER = "pt remains stable overnight plan continue monitoring labs pending".split()

rng = random.Random(7)


def synth_note(i):
    sentences = []
    for _ in range(rng.randint(3, 6)):
        words = [rng.choice(FILLER) for _ in range(rng.randint(5, 9))]
        if rng.random() < 0.5:
            words.insert(rng.randrange(len(words)), rng.choice(UMLS_TERMS))
        if rng.random() < 0.3:
            words.insert(rng.randrange(len(words)), rng.choice(I2B2_TERMS))
        sentences.append(" ".join(words) + " .")
    return ProgressNote(doc_id=f"demo-{i:04d}", text="\n".join(sentences))


notes = [synth_note(i) for i in range(500)]
umls = TermDictionary(UMLS_TERMS, UMLS_CHANNEL)
i2b2 = TermDictionary(I2B2_TERMS, I2B2_CHANNEL)
cfg = MaskPolicyConfig(seed=21)

with tempfile.TemporaryDirectory() as tmp:
    single = Path(tmp) / "single.jsonl"
    examples, stats = build_pretrain_corpus(iter(notes), umls, i2b2, cfg, workers=1)
    count = write_corpus(examples, single)
    print(f"wrote {count} masked examples")
    print("\ncorpus statistics:")
    print(stats.report())

    parallel = Path(tmp) / "parallel.jsonl"
    examples, _ = build_pretrain_corpus(iter(notes), umls, i2b2, cfg, workers=4)
    write_corpus(examples, parallel)
    identical = single.read_bytes() == parallel.read_bytes()
    print(f"\n1-worker and 4-worker outputs byte-identical: {identical}")

    first = next(read_corpus(single))
    print("\nfirst record:")
    print(f"  input:  {first.input_text[:70]}...")
    print(f"  target: {first.target_text[:70]}...")
