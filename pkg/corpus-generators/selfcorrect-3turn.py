import json
import random
import argparse
from pathlib import Path

OUTPUT_PATH = Path("data/corpora/selfcorrect-3turn.jsonl")

CATEGORIES = ["math", "reasoning", "coding"]

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

FIX_FREE_PREFIX = 6

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

def make_sentences(rng, used, min_len):
    """Sentences as lists of (token, is_content)."""
    sentences, n = [], 0
    while n < min_len:
        s = [(fresh_word(rng, used), True) if slot == "C" else (slot, False)
             for slot in rng.choice(TEMPLATES).split()]
        sentences.append(s)
        n += len(s)
    return sentences

def text(tokens):
    return " ".join(tokens)

# ------------------ Type 1: Answer, fix one step, final result ------------------

def gen_selfcorrect(rng, used, idx):
    sentences = make_sentences(rng, used, rng.randint(90, 110))
    flat = [tok for s in sentences for tok in s]
    tail_start = len(flat) - len(sentences[-1]) - len(sentences[-2])
    candidates = [i for i, (_, content) in enumerate(flat)
                  if content and FIX_FREE_PREFIX <= i < tail_start]

    tokens = [t for t, _ in flat]
    point = rng.choice(candidates)
    fix = fresh_word(rng, used)
    corrected = tokens[:point] + [fix] + tokens[point + 1:]

    t1, t2 = fresh_word(rng, used), fresh_word(rng, used)
    return {
        "id": f"selfcorrect-{idx:04d}",
        "category": rng.choice(CATEGORIES),
        "turns": [
            {"role": "user", "text": f"explain the steps to solve the task about {t1} {t2}"},
            {"role": "assistant", "text": text(tokens)},
            {"role": "user", "text": f"check your steps and fix the part about {tokens[point]} by using {fix}"},
            {"role": "assistant", "text": text(corrected)},
            {"role": "user", "text": f"now give only the final result for {t1}"},
            {"role": "assistant", "text": text(corrected[tail_start:])},
        ],
    }

# ------------------ Main ------------------

def generate(samples, seed):
    rng = random.Random(seed)
    used = set()
    return [gen_selfcorrect(rng, used, i + 1) for i in range(samples)]

def main():
    parser = argparse.ArgumentParser(description="Three-turn answer / fix / final-result corpus")
    parser.add_argument("--samples", type=int, default=60)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--fresh", action="store_true")
    args = parser.parse_args()

    rows = generate(args.samples, args.seed)
    write_jsonl(rows, fresh=args.fresh)

    print(f"Generated {len(rows)} transcripts at {OUTPUT_PATH}")

if __name__ == "__main__":
    main()
