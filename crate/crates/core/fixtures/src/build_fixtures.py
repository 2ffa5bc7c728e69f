"""Regenerates the JSON fixtures next to this directory.

Run from crates/core/fixtures: python3 src/build_fixtures.py
"""
import base64
import json
import re

PROSE = [
    "The river ran slowly through the valley and the farmers watched the water rise after the long rain",
    "A small boat drifted past the old mill while children waved from the bridge above",
    "Every morning the baker opened the shop early and the smell of fresh bread filled the street",
    "The library kept its oldest maps in a quiet room at the top of the building",
    "She planted tomatoes and beans along the fence, and by summer the garden was full",
    "Trains left the station every hour, carrying workers to the city and back again",
    "The lighthouse keeper wrote in his journal each night before he climbed the stairs",
    "Snow covered the hills for most of the winter and the roads were often closed",
    "In the market the traders called out prices for apples, cheese and warm bread",
    "The teacher read a story to the class while the rain tapped against the windows",
    "Birds gathered on the wires at dusk, waiting for the signal to fly south",
    "The museum opened a new hall for paintings of the coast and its fishing villages",
]


def corpus():
    src = open("src/code_corpus.py").read()
    funcs = [f.strip("\n") + "\n" for f in re.split(r"\n\n\n(?=def )", src)]
    assert len(funcs) == 50, len(funcs)
    with open("code_corpus.jsonl", "w") as f:
        for fn in funcs:
            name = re.match(r"def (\w+)", fn).group(1)
            f.write(json.dumps({"id": name, "text": fn}) + "\n")
    with open("prose_corpus.jsonl", "w") as f:
        for i, text in enumerate(PROSE):
            f.write(json.dumps({"id": f"prose{i}", "text": text + "\n"}) + "\n")


FIG2_PROMPT = "# write a function to get three maximum numbers from a list\ndef three_max(l):\n    re"
FIG2_WORDS = [
    " write", " a", " function", " to", " get", " three", " maximum", " numbers",
    " from", " list", "def", "_max", "(l", "):", "\n    ", "re", "return", "turn",
    " = []", "\n    for", " i", " in", " sorted(l)[-3:]",
]


def fig2():
    tokens = [bytes([b]) for b in range(256)] + [w.encode() for w in FIG2_WORDS] + [b"<|endoftext|>"]
    eos = len(tokens) - 1
    ids = {t: i for i, t in enumerate(tokens)}
    entries = []
    for i, t in enumerate(tokens):
        try:
            entries.append({"id": i, "text": t.decode()})
        except UnicodeDecodeError:
            entries.append({"id": i, "bytes_b64": base64.b64encode(t).decode()})
    vocab = {"version": 1, "tokens": entries, "specials": [eos]}
    with open("fig2_vocab.json", "w") as f:
        json.dump(vocab, f, indent=2)
        f.write("\n")

    v = len(tokens)

    def row(suffix, weights):
        probs = [0.0] * v
        for tok, p in weights.items():
            probs[ids[tok.encode() if isinstance(tok, str) else tok]] = p
        assert abs(sum(probs) - 1.0) < 1e-12
        return {"suffix_b64": base64.b64encode(suffix.encode()).decode(), "probs": probs}

    eos_tok = b"<|endoftext|>"
    rows = [
        row("(l", {"):": 1.0}),
        row("):", {"\n    ": 0.9, "\n": 0.1}),
        # At a fresh indentation the model prefers "return" over "re".
        row("):\n    ", {"return": 0.6, "re": 0.3, "\n    for": 0.1}),
        # After a bare "re" token the continuation degenerates.
        row("    re", {" = []": 0.8, "turn": 0.2}),
        row(" = []", {"\n    for": 1.0}),
        row("\n    for", {" i": 1.0}),
        row(" i", {" in": 1.0}),
        row(" in", {eos_tok: 1.0}),
        row("\n    return", {" sorted(l)[-3:]": 1.0}),
        row("[-3:]", {eos_tok: 1.0}),
    ]
    uniform = [1.0 / v] * v
    with open("fig2_table.json", "w") as f:
        json.dump({"rows": rows, "default": uniform}, f)
        f.write("\n")
    with open("fig2_prompts.jsonl", "w") as f:
        f.write(json.dumps({"id": "three_max", "prompt": FIG2_PROMPT}) + "\n")


if __name__ == "__main__":
    corpus()
    fig2()
