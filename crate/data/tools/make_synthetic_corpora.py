#!/usr/bin/env python3
"""Writes the synthetic stand-in corpora under data/.

    data/pet/pet.jsonl      45 documents, PET export layout
    data/decon/decon.jsonl  17 documents, canonical format with constraints
    data/atdp/atdp.jsonl    18 documents, canonical format with constraints

The texts are template-built process descriptions, not the original
corpora. Every document is checked so that grounding its gold mention
surfaces left to right, first unused window first, recovers the annotated
spans; documents failing the check are redrawn.

Usage: python3 data/tools/make_synthetic_corpora.py [--out data]
"""

import argparse
import json
import random
import re
from pathlib import Path

SEED = 20240611

ACTORS = [
    "the clerk", "the claims officer", "the manager", "the customer", "the secretary",
    "the warehouse team", "the sales department", "the accountant", "the supplier",
    "the reviewer", "the courier", "the head of unit",
]
VERBS = [
    "checks", "registers", "approves", "archives", "reviews", "prepares", "signs",
    "validates", "rejects", "updates", "prints", "files", "inspects", "completes",
]
SEND_VERBS = ["sends", "forwards", "hands over", "returns"]
DATA = [
    "the invoice", "the claim", "the order", "the request", "the report", "the contract",
    "the form", "the parcel", "the receipt", "the application", "the offer", "the ticket",
]
CONDITIONS = [
    "everything is in order", "the amount is below the limit", "the check succeeds",
    "it is urgent", "approval is granted", "the deadline has passed", "no issue is found",
]
SPECS = ["in detail", "by email", "within two days", "with great care", "at the end of the month"]
OPENERS = ["Then", "Afterwards", "Next", "After that", "Subsequently"]


def normalize(text):
    folded = " ".join(text.lower().split())
    return re.sub(r"^[^0-9a-z]+|[^0-9a-z]+$", "", folded)


def is_word(token):
    return any(c.isalnum() for c in token)


def grounds_back(tokens, mentions):
    """Simulates first-unused, non-overlapping grounding of gold surfaces."""
    used = []
    for start, end in sorted((m[1], m[2]) for m in mentions):
        target = normalize(" ".join(tokens[start:end]))
        length = len(target.split(" "))
        hit = None
        for s in range(len(tokens) - length + 1):
            window = tokens[s : s + length]
            if not (is_word(window[0]) and is_word(window[-1])):
                continue
            if normalize(" ".join(window)) != target:
                continue
            if any(s < ue and us < s + length for us, ue in used):
                continue
            hit = (s, s + length)
            break
        if hit != (start, end):
            return False
        used.append(hit)
    return True


class Builder:
    def __init__(self):
        self.tokens = []
        self.sentence = []
        self.word = []
        self.mentions = []  # (type, start, end)
        self.relations = []  # (type, source mention, target mention)
        self.current = 0
        self.in_sentence = 0

    def add(self, text, mention_type=None, capital=False):
        parts = text.split()
        if capital:
            parts[0] = parts[0][0].upper() + parts[0][1:]
        start = len(self.tokens)
        for p in parts:
            self.tokens.append(p)
            self.sentence.append(self.current)
            self.word.append(self.in_sentence)
            self.in_sentence += 1
        if mention_type is None:
            return None
        self.mentions.append((mention_type, start, len(self.tokens)))
        return len(self.mentions) - 1

    def stop(self):
        self.add(".")
        self.current += 1
        self.in_sentence = 0

    def rel(self, kind, source, target):
        self.relations.append((kind, source, target))


def pet_document(rng):
    b = Builder()
    actors = rng.sample(ACTORS, rng.randint(2, 3))
    data = rng.sample(DATA, 4)
    actor_ids = {a: [] for a in actors}
    data_ids = {d: [] for d in data}
    prev = []

    def clause(actor, verb=None, obj=None, capital=False):
        a = b.add(actor, "Actor", capital)
        actor_ids[actor].append(a)
        v = b.add(verb or rng.choice(VERBS), "Activity")
        obj = obj or rng.choice(data)
        d = b.add(obj, "Activity Data")
        data_ids[obj].append(d)
        b.rel("actor performer", v, a)
        b.rel("uses", v, d)
        return v

    def follow(targets):
        for p in prev:
            for t in targets:
                b.rel("flow", p, t)

    b.add("First ,")
    v = clause(actors[0])
    b.stop()
    prev = [v]
    for _ in range(rng.randint(3, 6)):
        kind = rng.choice(["then", "then", "send", "xor", "and", "spec"])
        if kind == "then":
            b.add(rng.choice(OPENERS))
            v = clause(rng.choice(actors))
            b.stop()
            follow([v])
            prev = [v]
        elif kind == "send":
            sender, receiver = rng.sample(actors, 2)
            v = clause(sender, rng.choice(SEND_VERBS), capital=True)
            b.add("to")
            r = b.add(receiver, "Actor")
            actor_ids[receiver].append(r)
            b.rel("actor recipient", v, r)
            b.stop()
            follow([v])
            prev = [v]
        elif kind == "xor":
            g1 = b.add("If", "XOR Gateway")
            c = b.add(rng.choice(CONDITIONS), "Condition Specification")
            b.add(",")
            yes = clause(rng.choice(actors))
            b.stop()
            g2 = b.add("Otherwise", "XOR Gateway")
            b.add(",")
            no = clause(rng.choice(actors))
            b.stop()
            follow([g1])
            b.rel("flow", g1, c)
            b.rel("flow", c, yes)
            b.rel("flow", g2, no)
            b.rel("same gateway", g1, g2)
            prev = [yes, no]
        elif kind == "and":
            g = b.add("Meanwhile", "AND Gateway")
            b.add(",")
            v = clause(rng.choice(actors))
            b.stop()
            follow([g])
            b.rel("flow", g, v)
            prev = [v]
        else:
            v = clause(rng.choice(actors), capital=True)
            s = b.add(rng.choice(SPECS), "Further Specification")
            b.rel("further specification", v, s)
            b.stop()
            follow([v])
            prev = [v]
    b.add("Finally , the process ends")
    b.stop()
    groups = [ids for ids in list(actor_ids.values()) + list(data_ids.values()) if ids]
    return b, groups


def pet_record(doc_id, b, groups):
    first = lambda m: b.mentions[m][1]
    head = lambda m: {"sentence-ID": b.sentence[first(m)], "word-ID": b.word[first(m)]}
    tags = ["O"] * len(b.tokens)
    for ty, s, e in b.mentions:
        tags[s] = "B-" + ty
        for k in range(s + 1, e):
            tags[k] = "I-" + ty
    rel = {
        "source-head-sentence-ID": [],
        "source-head-word-ID": [],
        "relation-type": [],
        "target-head-sentence-ID": [],
        "target-head-word-ID": [],
    }
    for kind, s, t in b.relations:
        rel["source-head-sentence-ID"].append(b.sentence[first(s)])
        rel["source-head-word-ID"].append(b.word[first(s)])
        rel["relation-type"].append(kind)
        rel["target-head-sentence-ID"].append(b.sentence[first(t)])
        rel["target-head-word-ID"].append(b.word[first(t)])
    return {
        "document name": doc_id,
        "tokens": b.tokens,
        "tokens-IDs": b.word,
        "ner_tags": tags,
        "sentence-IDs": b.sentence,
        "relations": rel,
        "entities": [[head(m) for m in g] for g in groups],
    }


# Constraint corpora: (third person surface, base form used in constraints)
DECON_ACTIONS = [
    ("submits the order", "submit order"),
    ("checks the stock", "check stock"),
    ("confirms the payment", "confirm payment"),
    ("ships the goods", "ship goods"),
    ("sends the invoice", "send invoice"),
    ("archives the file", "archive file"),
    ("registers the claim", "register claim"),
    ("approves the request", "approve request"),
    ("cancels the booking", "cancel booking"),
    ("signs the contract", "sign contract"),
    ("closes the case", "close case"),
    ("reviews the application", "review application"),
]

ATDP_ENTITIES = ["the applicant", "the office", "the bank", "the auditor", "the tenant", "the agency"]
ATDP_ACTIONS = [
    ("submit the form", "submit form"),
    ("pay the fee", "pay fee"),
    ("provide an identity document", "provide identity document"),
    ("verify the documents", "verify documents"),
    ("issue the permit", "issue permit"),
    ("notify the owner", "notify owner"),
    ("renew the licence", "renew licence"),
    ("file the tax return", "file tax return"),
    ("inspect the premises", "inspect premises"),
    ("sign the agreement", "sign agreement"),
]
ATDP_CONDITIONS = ["the form is incomplete", "the fee is overdue", "the permit expires", "the request is urgent"]
ATDP_EVENTS = ["the hearing", "the inspection date", "the end of the quarter", "the annual review"]


def tokens_json(b):
    return [{"text": t, "index": k, "sentence_index": s} for k, (t, s) in enumerate(zip(b.tokens, b.sentence))]


def canonical_record(doc_id, b, constraints):
    return {
        "format_version": 1,
        "id": doc_id,
        "text": " ".join(b.tokens),
        "tokens": tokens_json(b),
        "mentions": [
            {"id": f"m{k}", "mention_type": ty, "token_indices": list(range(s, e))}
            for k, (ty, s, e) in enumerate(b.mentions)
        ],
        "entities": [],
        "relations": [],
        "constraints": [
            dict(
                {"id": f"c{k}", "constraint_type": ty, "negated": neg, "first_action": a1},
                **({"second_action": a2} if a2 else {}),
            )
            for k, (ty, neg, a1, a2) in enumerate(constraints)
        ],
    }


def decon_document(rng):
    b = Builder()
    acts = rng.sample(DECON_ACTIONS, rng.randint(3, 5))
    cons = []
    b.add("The process starts when someone")
    b.add(acts[0][0], "Action")
    b.stop()
    cons.append(("init", False, acts[0][1], None))
    for (s1, a1), (s2, a2) in zip(acts, acts[1:]):
        form = rng.choice(["precedence", "response", "succession", "not succession"])
        if form == "precedence":
            b.add("Only after someone")
            b.add(s1, "Action")
            b.add(", someone")
            b.add(s2, "Action")
        elif form == "response":
            b.add("Whenever someone")
            b.add(s1, "Action")
            b.add(", eventually someone")
            b.add(s2, "Action")
        elif form == "succession":
            b.add("Someone")
            b.add(s1, "Action")
            b.add("if and only if later someone")
            b.add(s2, "Action")
        else:
            b.add("Once someone")
            b.add(s1, "Action")
            b.add(", nobody")
            b.add(s2, "Action")
            b.add("anymore")
        b.stop()
        negated = form.startswith("not ")
        cons.append((form.replace("not ", ""), negated, a1, a2))
    b.add("The process ends when someone")
    b.add(acts[-1][0], "Action")
    b.stop()
    cons.append(("end", False, acts[-1][1], None))
    return b, cons


def atdp_document(rng):
    b = Builder()
    entities = rng.sample(ATDP_ENTITIES, 2)
    acts = rng.sample(ATDP_ACTIONS, rng.randint(3, 4))
    cons = []
    b.add(entities[0], "Entity", capital=True)
    b.add("must")
    b.add(acts[0][0], "Action")
    b.stop()
    cons.append(("existence", False, acts[0][1], None))
    for (s1, a1), (s2, a2) in zip(acts, acts[1:]):
        form = rng.choice(["precedence", "response", "chain response", "coexistence", "not coexistence"])
        if form == "precedence":
            b.add(rng.choice(entities), "Entity", capital=True)
            b.add("may only")
            b.add(s2, "Action")
            b.add("after")
            b.add(rng.choice(ATDP_EVENTS), "Event")
            b.add("and once someone has chosen to")
            b.add(s1, "Action")
        elif form == "response":
            b.add("If")
            b.add(rng.choice(ATDP_CONDITIONS), "Condition")
            b.add(", someone who chose to")
            b.add(s1, "Action")
            b.add("must later")
            b.add(s2, "Action")
        elif form == "chain response":
            b.add("Right after choosing to")
            b.add(s1, "Action")
            b.add(",")
            b.add(rng.choice(entities), "Entity")
            b.add("has to")
            b.add(s2, "Action")
        else:
            b.add("Whoever chooses to")
            b.add(s1, "Action")
            b.add("must" if form == "coexistence" else "must not")
            b.add("also")
            b.add(s2, "Action")
        b.stop()
        negated = form.startswith("not ")
        cons.append((form.replace("not ", ""), negated, a1, a2))
    return b, cons


def draw(rng, make):
    while True:
        built = make(rng)
        b = built[0]
        if grounds_back(b.tokens, b.mentions):
            return built


def pet_ids():
    ids = [f"doc-{a}.{c}" for a in range(1, 11) for c in range(1, 6)]
    return ids[:45]


def write_lines(path, records):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False, separators=(",", ":")) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent))
    out = Path(ap.parse_args().out)
    rng = random.Random(SEED)

    pet = []
    for doc_id in pet_ids():
        b, groups = draw(rng, pet_document)
        pet.append(pet_record(doc_id, b, groups))
    write_lines(out / "pet" / "pet.jsonl", pet)

    for name, make, count in [("decon", decon_document, 17), ("atdp", atdp_document, 18)]:
        schema = json.loads((out / "schemas" / f"{name}.json").read_text())
        records = [{"format_version": 1, "schema": schema}]
        for k in range(count):
            b, cons = draw(rng, make)
            records.append(canonical_record(f"{name}-{k + 1:02d}", b, cons))
        write_lines(out / name / f"{name}.jsonl", records)


if __name__ == "__main__":
    main()
