#!/usr/bin/env python3
"""Generate the bundled sample corpus (about 1 MB of template English).

Paragraphs mix a few topics so that ambiguous words such as "bank" or
"bat" appear in more than one sense. Output is deterministic for a seed.
"""
import argparse
import random

TOPICS = {
    "finance": {
        "noun": ["bank", "loan", "deposit", "account", "interest", "credit", "mortgage",
                 "investor", "market", "stock", "fund", "payment", "cash", "branch", "teller"],
        "verb": ["approved", "raised", "lowered", "charged", "transferred", "invested",
                 "borrowed", "repaid", "audited", "reported"],
        "adj": ["central", "private", "annual", "federal", "savings", "commercial", "monthly"],
        "place": ["the city", "wall street", "the office", "the capital", "the branch"],
    },
    "river": {
        "noun": ["bank", "river", "water", "shore", "stream", "fish", "boat", "current",
                 "mud", "reeds", "bridge", "valley", "flood", "fisherman", "heron"],
        "verb": ["flooded", "crossed", "eroded", "drifted", "flowed", "watched", "fished",
                 "rowed", "followed", "reached"],
        "adj": ["muddy", "steep", "grassy", "quiet", "wide", "shallow", "rocky"],
        "place": ["the valley", "the delta", "the forest", "the village", "the meadow"],
    },
    "sports": {
        "noun": ["bat", "ball", "team", "coach", "player", "match", "season", "goal",
                 "referee", "league", "stadium", "pitch", "crowd", "score", "trophy"],
        "verb": ["won", "lost", "scored", "trained", "played", "swung", "defended",
                 "celebrated", "coached", "missed"],
        "adj": ["final", "home", "national", "young", "winning", "rival", "strong"],
        "place": ["the stadium", "the field", "the arena", "the club", "the park"],
    },
    "nature": {
        "noun": ["bat", "cave", "owl", "tree", "forest", "insect", "night", "wing",
                 "nest", "moth", "branch", "leaf", "spring", "mountain", "wolf"],
        "verb": ["flew", "hunted", "slept", "nested", "grew", "hid", "circled",
                 "emerged", "rested", "fed"],
        "adj": ["dark", "tall", "wild", "ancient", "small", "green", "silent"],
        "place": ["the woods", "the hills", "the cave", "the mountain", "the canyon"],
    },
    "food": {
        "noun": ["bread", "soup", "kitchen", "chef", "recipe", "salt", "pepper", "oven",
                 "dinner", "market", "cheese", "apple", "sauce", "spoon", "table"],
        "verb": ["cooked", "baked", "tasted", "served", "mixed", "ordered", "sliced",
                 "prepared", "ate", "bought"],
        "adj": ["fresh", "warm", "sweet", "spicy", "simple", "homemade", "crisp"],
        "place": ["the restaurant", "the kitchen", "the bakery", "the market", "the table"],
    },
}

TEMPLATES = [
    "The {adj} {noun} {verb} the {noun2} near {place}.",
    "A {noun} {verb} the {adj} {noun2} yesterday.",
    "Everyone said the {noun} {verb} the {noun2} at {place}.",
    "Why has the {adj} {noun} {verb} every {noun2}?",
    "After the {noun2} {verb} the {noun}, the {adj} {noun3} waited.",
    "The {noun} and the {noun2} {verb} by {place}!",
    "She {verb} a {adj} {noun} while the {noun2} stayed at {place}.",
    "They {verb} the {noun} because the {noun2} was {adj}.",
]


def sentence(rng, topic):
    t = TOPICS[topic]
    nouns = rng.sample(t["noun"], 3)
    text = rng.choice(TEMPLATES).format(
        adj=rng.choice(t["adj"]), noun=nouns[0], noun2=nouns[1], noun3=nouns[2],
        verb=rng.choice(t["verb"]), place=rng.choice(t["place"]))
    return text[0].upper() + text[1:]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--bytes", type=int, default=1_000_000)
    ap.add_argument("-o", "--output", default="data/sample_corpus.txt")
    args = ap.parse_args()
    rng = random.Random(args.seed)
    names = sorted(TOPICS)
    size = 0
    with open(args.output, "w", encoding="utf-8", newline="\n") as out:
        while size < args.bytes:
            topic = rng.choice(names)
            para = " ".join(sentence(rng, topic) for _ in range(rng.randint(3, 7)))
            out.write(para + "\n")
            size += len(para) + 1


if __name__ == "__main__":
    main()
