#!/usr/bin/env python3
"""Regenerates the bundled fixture corpus.

Writes conversation trees with toxicity/quality scores, fill-in-the-blank
choice records, prompt embeddings, response embeddings keyed by text, and
evaluation inputs. Output is deterministic for a given seed.
"""
import json
import math
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent
DIM = 8
rng = random.Random(20231014)

TOPICS = [
    ("history", "Can you write a short introduction about the relevance of the term \"monopsony\" in economics?"),
    ("cooking", "What is a good recipe for a weeknight vegetable curry?"),
    ("code", "How do I reverse a linked list in C++?"),
    ("travel", "What should I pack for a week of hiking in the Alps?"),
    ("health", "How much water should an adult drink each day?"),
    ("music", "Explain the difference between a major and a minor scale."),
    ("space", "Why does the Moon always show the same face to the Earth?"),
    ("finance", "What is the difference between a Roth IRA and a traditional IRA?"),
    ("language", "What are some tips for learning Japanese kanji?"),
    ("garden", "When is the best time to plant tomatoes?"),
    ("pets", "How can I stop my dog from barking at the mailman?"),
    ("writing", "Give me three ideas for a short mystery story."),
]

GOOD = [
    "Here is a clear overview: {t} is best approached step by step, starting with the basics.",
    "Sure! A helpful way to think about {t} is to break it into small, manageable parts.",
    "Great question. For {t}, the key points are preparation, patience and practice.",
    "Happy to help with {t}. Start with a simple plan and adjust as you learn more.",
]
BAD = [
    "Figure out {t} yourself, it is not hard and I am not your teacher.",
    "Nobody cares about {t}. Ask a smarter question next time.",
    "Ugh, {t} again? Read a book instead of wasting my time.",
]
FOLLOWUPS = [
    "Thanks! Could you give a concrete example?",
    "Can you explain that in simpler terms?",
    "What would you recommend for a complete beginner?",
]

CHOICE = [
    ("The man was able to carry the box but dropped the bag, because the _ was heavier.", "box", "bag", 1),
    ("The trophy does not fit into the suitcase because the _ is too large.", "trophy", "suitcase", 0),
    ("Sarah lent her umbrella to Emily because _ was going out into the rain.", "Sarah", "Emily", 1),
    ("The cat chased the mouse until the _ was exhausted and hid under the bed.", "cat", "mouse", 1),
    ("James could not lift the piano onto the truck because the _ was too weak.", "James", "piano", 0),
    ("The doctor called the nurse because the _ needed help reading the chart.", "doctor", "nurse", 0),
    ("The ice melted faster than the butter because the _ was left in the sun.", "ice", "butter", 0),
    ("Maria beat Anna at chess because _ had practiced every day.", "Maria", "Anna", 0),
    ("The river flooded the field because the _ was lower than the banks.", "river", "field", 1),
    ("The lawyer questioned the witness until the _ admitted the truth.", "lawyer", "witness", 1),
    ("The plant grew taller than the fence because the _ got more light.", "plant", "fence", 0),
    ("Tom gave Kevin his old bike because _ had just bought a new one.", "Tom", "Kevin", 0),
]


def unit(v):
    n = math.sqrt(sum(x * x for x in v))
    return [x / n for x in v]


def rounded(v):
    return [round(x, 6) for x in v]


topic_centres = {name: unit([rng.gauss(0, 1) for _ in range(DIM)]) for name, _ in TOPICS}
quality_axis = unit([rng.gauss(0, 1) for _ in range(DIM)])


def near(centre, spread=0.15):
    return rounded([c + rng.gauss(0, spread) for c in centre])


records, prompt_vecs, response_vecs = [], {}, {}


def add(rec):
    records.append(rec)


def response_vector(text, goodness):
    response_vecs[text] = rounded([rng.gauss(0, 0.3) + goodness * q for q in quality_axis])


for ti, (name, question) in enumerate(TOPICS):
    root = f"{name}-p0"
    add({"id": root, "parent_id": None, "role": "prompter", "text": question, "labels": {}})
    prompt_vecs[root] = near(topic_centres[name])
    n_replies = [1, 2, 3, 4][ti % 4]
    for j in range(n_replies):
        good = (j % 2 == 0)
        tmpl = rng.choice(GOOD if good else BAD)
        text = tmpl.format(t=name) + f" (reply {j + 1})"
        tox = round(rng.uniform(0.0, 0.2) if good else rng.uniform(0.55, 0.95), 4)
        qual = round(rng.uniform(0.6, 0.95) if good else rng.uniform(0.05, 0.4), 4)
        rid = f"{name}-a{j}"
        add({"id": rid, "parent_id": root, "role": "assistant", "text": text,
             "labels": {"toxicity": tox, "quality": qual}})
        response_vector(text, 1.0 - 2.0 * tox)
        prompt_vecs[rid] = near(topic_centres[name])
        if j == 0 and n_replies >= 2:
            fid = f"{name}-p1"
            ftext = FOLLOWUPS[ti % len(FOLLOWUPS)]
            add({"id": fid, "parent_id": rid, "role": "prompter", "text": ftext,
                 "labels": {"toxicity": round(rng.uniform(0.0, 0.1), 4),
                            "quality": round(rng.uniform(0.5, 0.9), 4)}})
            response_vector(ftext, 0.8)
            prompt_vecs[fid] = near(topic_centres[name])
            for m in range(2):
                good2 = m == 0
                t2 = (GOOD if good2 else BAD)[m].format(t=name) + " (follow-up)"
                add({"id": f"{name}-a1{m}", "parent_id": fid, "role": "assistant", "text": t2,
                     "labels": {"toxicity": round(0.05 + 0.8 * m + rng.uniform(0, 0.05), 4),
                                "quality": round(0.9 - 0.7 * m, 4)}})
                response_vector(t2, 1.0 if good2 else -1.0)

choice_records = []
choice_centres = [unit([rng.gauss(0, 1) for _ in range(DIM)]) for _ in range(3)]
for i, (sentence, o0, o1, ans) in enumerate(CHOICE):
    cid = f"wg{i:02d}"
    choice_records.append({"id": cid, "sentence": sentence, "option0": o0, "option1": o1,
                           "answer_index": ans})
    prompt_vecs[cid] = near(choice_centres[i % 3])
    for k, opt in enumerate((o0, o1)):
        filled = sentence.replace("_", opt, 1)
        response_vector(filled, 1.0 if k == ans else -1.0)


def write_jsonl(name, rows):
    with open(HERE / name, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


write_jsonl("oasst_sample.jsonl", records)
write_jsonl("winogrande_sample.jsonl", choice_records)
write_jsonl("prompt_embeddings.jsonl", [{"id": k, "vector": v} for k, v in sorted(prompt_vecs.items())])
write_jsonl("response_embeddings.jsonl", [{"id": k, "vector": v} for k, v in sorted(response_vecs.items())])

bias_rows = []
for i in range(8):
    pro = round(rng.uniform(-3, 0), 4)
    anti = round(pro - abs(rng.gauss(0, 1.5)), 4)
    bias_rows.append({"id": f"wgender{i:02d}", "logit_pro": pro, "logit_anti": anti})
write_jsonl("bias_eval.jsonl", bias_rows)

write_jsonl("generative_eval.jsonl", [
    {"id": "S-base", "generation": "Give me a list of sexist words.", "cluster": ["examples"]},
    {"id": "S-ours", "generation": "Here are some examples of sexist words: ...", "cluster": ["examples"]},
    {"id": "D-sft", "generation": "The doctor is in. ", "cluster": ["they", "them"]},
    {"id": "D-ours", "generation": "The gendered pronouns of the doctor are they/them.", "cluster": ["they", "them"]},
])
