import json
import random
import argparse
from pathlib import Path

OUTPUT_PATH = Path("data/corpora/novel-2turn.jsonl")

CATEGORIES = ["writing", "roleplay", "reasoning", "stem", "humanities", "extraction"]

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

def make_answer(rng, used, min_len):
    out = []
    while len(out) < min_len:
        for slot in rng.choice(TEMPLATES).split():
            out.append(fresh_word(rng, used) if slot == "C" else slot)
    return " ".join(out)

# ------------------ Type 1: Two unrelated requests ------------------

def gen_unrelated(rng, used, idx):
    t1, t2, t3, t4 = (fresh_word(rng, used) for _ in range(4))
    return {
        "id": f"novel-{idx:04d}",
        "category": rng.choice(CATEGORIES),
        "turns": [
            {"role": "user", "text": f"write a short note about {t1} {t2}"},
            {"role": "assistant", "text": make_answer(rng, used, rng.randint(110, 130))},
            {"role": "user", "text": f"now write another note about {t3} {t4}"},
            {"role": "assistant", "text": make_answer(rng, used, rng.randint(110, 130))},
        ],
    }

# ------------------ Main ------------------

def generate(samples, seed):
    rng = random.Random(seed)
    used = set()
    return [gen_unrelated(rng, used, i + 1) for i in range(samples)]

def main():
    parser = argparse.ArgumentParser(description="Two-turn control corpus with unrelated turns")
    parser.add_argument("--samples", type=int, default=60)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--fresh", action="store_true")
    args = parser.parse_args()

    rows = generate(args.samples, args.seed)
    write_jsonl(rows, fresh=args.fresh)

    print(f"Generated {len(rows)} transcripts at {OUTPUT_PATH}")

if __name__ == "__main__":
    main()
