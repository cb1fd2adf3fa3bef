import json
import random
import argparse
from pathlib import Path

OUTPUT_PATH = Path("data/corpora/extractive-1turn.jsonl")

CATEGORIES = ["news", "science", "business", "sports", "politics", "health"]

# C = content slot. Function runs never exceed two tokens, sentence boundary included.
TEMPLATES = [
    "the C C of the C C .",
    "C C in a C , C C .",
    "a C C to the C .",
    "C C with C C C .",
    "C C for the C , and C .",
    "our C C is C C .",
    "each C C on the C .",
    "C of C C , so C C .",
    "the C C and C C .",
]

ARTICLE_SENTENCES = (14, 18)
KEY_SENTENCES = (4, 6)

CONSONANTS = "bdfgklmnprstvz"
VOWELS = "aeiou"

# ------------------ Utilities ------------------

def write_jsonl(rows, fresh=False):
    OUTPUT_PATH.parent.mkdir(parents=True, exist_ok=True)
    mode = "w" if fresh else "a"
    with open(OUTPUT_PATH, mode, encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")

def fresh_word(rng, used):
    while True:
        w = "".join(rng.choice(CONSONANTS) + rng.choice(VOWELS) for _ in range(3))
        if w not in used:
            used.add(w)
            return w

def make_sentence(rng, used):
    return " ".join(fresh_word(rng, used) if slot == "C" else slot for slot in rng.choice(TEMPLATES).split())

# ------------------ Type 1: Extractive summary ------------------

def gen_extract(rng, used, idx):
    article = [make_sentence(rng, used) for _ in range(rng.randint(*ARTICLE_SENTENCES))]
    picked = sorted(rng.sample(range(len(article)), rng.randint(*KEY_SENTENCES)))
    topic = [fresh_word(rng, used) for _ in range(3)]

    user = (f"copy the key sentences of this article about {topic[0]} {topic[1]} in their original order : "
            + " ".join(article)
            + f" keep the focus on {topic[2]}")

    return {
        "id": f"extractive-{idx:04d}",
        "category": rng.choice(CATEGORIES),
        "turns": [
            {"role": "user", "text": user},
            {"role": "assistant", "text": " ".join(article[i] for i in picked)},
        ],
    }

# ------------------ Main ------------------

def generate(samples, seed):
    rng = random.Random(seed)
    used = set()
    return [gen_extract(rng, used, i + 1) for i in range(samples)]

def main():
    parser = argparse.ArgumentParser(description="Single-turn corpus where the answer is extracted from the prompt")
    parser.add_argument("--samples", type=int, default=60)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--fresh", action="store_true")
    args = parser.parse_args()

    rows = generate(args.samples, args.seed)
    write_jsonl(rows, fresh=args.fresh)

    print(f"Generated {len(rows)} transcripts at {OUTPUT_PATH}")

if __name__ == "__main__":
    main()
