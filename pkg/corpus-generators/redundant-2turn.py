import json
import random
import argparse
from pathlib import Path

OUTPUT_PATH = Path("data/corpora/redundant-2turn.jsonl")

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

# short fragments span the usual gamma range; the two long ones outrun a default copy chunk
QUOTE_LENGTHS = [3, 3, 4, 4, 5, 5, 6, 6, 7, 8, 14, 16]
QUOTE_FREE_PREFIX = 6
SUBSTITUTIONS = 2

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
    """List of (token, is_content) made of whole template sentences."""
    out = []
    while len(out) < min_len:
        for slot in rng.choice(TEMPLATES).split():
            if slot == "C":
                out.append((fresh_word(rng, used), True))
            else:
                out.append((slot, False))
    return out

def place_quotes(rng, n):
    """Disjoint (start, length) spans after the free prefix, each followed by an unquoted token."""
    lengths = QUOTE_LENGTHS[:]
    rng.shuffle(lengths)
    slack = n - QUOTE_FREE_PREFIX - sum(lengths) - len(lengths)
    if slack < 0:
        return None
    cuts = sorted(rng.randint(0, slack) for _ in range(len(lengths)))
    gaps = [b - a for a, b in zip([0] + cuts, cuts + [slack])]
    spans = []
    pos = QUOTE_FREE_PREFIX + gaps[0]
    for i, length in enumerate(lengths):
        spans.append((pos, length))
        pos += length + 1 + gaps[i + 1]
    return spans

def text(tokens):
    return " ".join(tokens)

# ------------------ Type 1: Rewrite with substitutions ------------------

def gen_rewrite(rng, used, idx):
    while True:
        answer = make_answer(rng, used, rng.randint(110, 130))
        spans = place_quotes(rng, len(answer))
        if spans is None:
            continue
        blocked = set()
        for start, length in spans:
            blocked.update(range(start, start + length + 1))
        candidates = [i for i, (_, content) in enumerate(answer)
                      if content and i >= QUOTE_FREE_PREFIX and i not in blocked]
        if len(candidates) >= SUBSTITUTIONS:
            break

    tokens = [t for t, _ in answer]
    points = sorted(rng.sample(candidates, SUBSTITUTIONS))
    replacements = {i: fresh_word(rng, used) for i in points}
    rewritten = [replacements.get(i, t) for i, t in enumerate(tokens)]

    topic = [fresh_word(rng, used) for _ in range(3)]
    quotes = [text(tokens[s:s + n]) for s, n in spans]
    rng.shuffle(quotes)

    u1 = (f"write a short note about {topic[0]} {topic[1]} that uses these exact phrases : "
          + " ; ".join(quotes)
          + f" . keep the focus on {topic[2]}")
    swaps = " and ".join(f"{tokens[i]} with {replacements[i]}" for i in points)
    u2 = f"rewrite your answer but replace {swaps}"

    return {
        "id": f"redundant-{idx:04d}",
        "category": rng.choice(CATEGORIES),
        "turns": [
            {"role": "user", "text": u1},
            {"role": "assistant", "text": text(tokens)},
            {"role": "user", "text": u2},
            {"role": "assistant", "text": text(rewritten)},
        ],
    }

# ------------------ Main ------------------

def generate(samples, seed):
    rng = random.Random(seed)
    used = set()
    return [gen_rewrite(rng, used, i + 1) for i in range(samples)]

def main():
    parser = argparse.ArgumentParser(description="Two-turn corpus where turn 2 rewrites the turn 1 answer")
    parser.add_argument("--samples", type=int, default=60)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--fresh", action="store_true")
    args = parser.parse_args()

    rows = generate(args.samples, args.seed)
    write_jsonl(rows, fresh=args.fresh)

    print(f"Generated {len(rows)} transcripts at {OUTPUT_PATH}")

if __name__ == "__main__":
    main()
