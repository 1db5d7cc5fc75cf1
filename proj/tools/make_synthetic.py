#!/usr/bin/env python3
"""Writes the bundled synthetic corpora under data/.

  toy_deterministic.txt  en + xx, every word names exactly one unit
  geo_synthetic.txt      en, de, es; geography-flavoured queries with fillers
  mrl_fixture.txt        50 logical forms for parse/serialize round trips

Output is a pure function of the fixed seeds below.
"""

import argparse
import pathlib
import random

STATES = ["texas", "ohio", "utah", "iowa", "maine", "idaho", "kansas", "oregon",
          "nevada", "alaska", "new york", "new mexico"]
CITIES = ["austin", "dallas", "boston", "denver", "seattle", "portland", "chicago", "san diego"]
RIVERS = ["mississippi", "colorado", "red", "rio grande"]
KINDS = ["state", "city", "river", "lake", "mountain"]
RELS = ["loc", "traverse", "next_to"]
MODS = ["largest", "smallest", "highest", "major"]

LEX = {
    "en": {"answer": "what", "state": "states", "city": "cities", "river": "rivers", "lake": "lakes",
           "mountain": "mountains", "all": "all", "loc": "in", "traverse": "crossing", "next_to": "bordering",
           "capital": "capital", "largest": "largest", "smallest": "smallest", "highest": "highest",
           "major": "major", "stateid": "state", "cityid": "city", "riverid": "river", "exclude": "excluding",
           "intersection": "and"},
    "de": {"answer": "welche", "state": "staaten", "city": "staedte", "river": "fluesse", "lake": "seen",
           "mountain": "berge", "all": "alle", "loc": "in", "traverse": "durchquerend", "next_to": "angrenzend",
           "capital": "hauptstadt", "largest": "groesste", "smallest": "kleinste", "highest": "hoechste",
           "major": "wichtige", "stateid": "bundesstaat", "cityid": "stadt", "riverid": "fluss",
           "exclude": "ohne", "intersection": "und"},
    "es": {"answer": "cuales", "state": "estados", "city": "ciudades", "river": "rios", "lake": "lagos",
           "mountain": "montanas", "all": "todos", "loc": "en", "traverse": "cruzando", "next_to": "limitando",
           "capital": "capital", "largest": "mayor", "smallest": "menor", "highest": "mas_alto",
           "major": "principales", "stateid": "estado", "cityid": "ciudad", "riverid": "rio",
           "exclude": "excepto", "intersection": "y"},
}
FILLERS = {"en": ["the", "are", "?"], "de": ["die", "sind", "?"], "es": ["los", "son", "?"]}

def signatures(states, cities, rivers):
    sig = ["Q:answer(E)", "E:all", "E:capital(E)", "E:exclude(E,E)", "E:intersection(E,E)"]
    sig += [f"E:{k}(E)" for k in KINDS + RELS + MODS]
    sig += ["E:stateid(SN)", "E:cityid(CN)", "E:riverid(RN)"]
    sig += [f"SN:'{s}'" for s in states] + [f"CN:'{c}'" for c in cities] + [f"RN:'{r}'" for r in rivers]
    return sig


# Trees are (function, [children]) with constants as ("'name'", []).
def named(rng, states, cities, rivers):
    kind = rng.choice(["stateid", "cityid", "riverid"])
    pool = {"stateid": states, "cityid": cities, "riverid": rivers}[kind]
    return (kind, [(f"'{rng.choice(pool)}'", [])])


def random_query(rng, states, cities, rivers, shapes=7):
    kind = rng.choice(KINDS)
    shape = rng.randrange(shapes)
    if shape == 0:
        body = (kind, [("all", [])])
    elif shape == 1:
        body = (kind, [(rng.choice(RELS), [named(rng, states, cities, rivers)])])
    elif shape == 2:
        body = (rng.choice(MODS), [(kind, [("all", [])])])
    elif shape == 3:
        body = ("capital", [("stateid", [(f"'{rng.choice(states)}'", [])])])
    elif shape == 4:
        body = (kind, [(rng.choice(RELS), [(rng.choice(KINDS), [("all", [])])])])
    elif shape == 5:
        body = ("exclude", [(kind, [("all", [])]), (rng.choice(RELS), [named(rng, states, cities, rivers)])])
    else:
        body = ("intersection", [(kind, [("all", [])]),
                                 (rng.choice(RELS), [named(rng, states, cities, rivers)])])
    return ("answer", [body])


def mrl(t):
    f, cs = t
    return f if not cs else f + "(" + ", ".join(mrl(c) for c in cs) + ")"


def unit_words(f, lang):
    if f.startswith("'"):
        return f.strip("'").split()
    return LEX[lang][f].split()


def preorder(t, lang):
    f, cs = t
    out = unit_words(f, lang)
    for c in cs:
        out += preorder(c, lang)
    return out


def postorder(t, lang):
    f, cs = t
    out = []
    for c in cs:
        out += postorder(c, lang)
    return out + unit_words(f, lang)


def edges(t, parent=None, slot=0, acc=None):
    acc = set() if acc is None else acc
    f, cs = t
    acc.add((parent, slot, f))
    for k, c in enumerate(cs):
        edges(c, f, k, acc)
    return acc


def header(langs, sig):
    return "".join(f"lang {l}\n" for l in langs) + "%%\n" + "".join(s + "\n" for s in sig) + "%%\n"


def record(i, lang, tokens, tree):
    return f"id {i} {lang}\nnl: {' '.join(tokens)}\nmrl: {mrl(tree)}\n"


def toy_deterministic(rng):
    states, cities, rivers = STATES[:4], CITIES[:2], RIVERS[:2]

    def words(f, lang):
        name = f.strip("'").replace(" ", "_")
        return name if lang == "en" else "xx_" + name

    # Each node's word goes before or after its subtree at random, so the
    # only alignment consistent across the corpus is the true one.
    def order(t, lang, flips):
        f, cs = t
        below = []
        for c in cs:
            below += order(c, lang, flips)
        w = [words(f, lang)]
        return below + w if flips.pop() else w + below

    def count(t):
        return 1 + sum(count(c) for c in t[1])

    train, seen = [], set()
    while len(train) < 30:
        t = random_query(rng, states, cities, rivers, shapes=5)
        if mrl(t) not in seen:
            seen.add(mrl(t))
            train.append(t)
    known_edges = set().union(*(edges(t) for t in train))
    test = []
    while len(test) < 10:
        t = random_query(rng, states, cities, rivers, shapes=5)
        if mrl(t) in seen or not edges(t) <= known_edges:
            continue
        seen.add(mrl(t))
        test.append(t)
    trees = train + test

    text = header(["en", "xx"], signatures(states, cities, rivers))
    for lang in ["en", "xx"]:
        for i, t in enumerate(trees):
            flips = [rng.random() < 0.5 for _ in range(count(t))]
            text += record(i + 1, lang, order(t, lang, flips), t)
    return text


def geo_synthetic(rng, per_language):
    trees, seen = [], set()
    while len(trees) < per_language:
        t = random_query(rng, STATES, CITIES, RIVERS)
        if mrl(t) in seen and rng.random() < 0.8:
            continue
        seen.add(mrl(t))
        trees.append(t)
    text = header(["de", "en", "es"], signatures(STATES, CITIES, RIVERS))
    for lang in ["en", "de", "es"]:
        for i, t in enumerate(trees):
            toks = postorder(t, lang) if lang == "de" else preorder(t, lang)
            fill = FILLERS[lang]
            toks = toks[:1] + [fill[1], fill[0]] + toks[1:] + [fill[2]]
            text += record(i + 1, lang, toks, t)
    return text


def mrl_fixture(rng):
    text = header(["en"], signatures(STATES, CITIES, RIVERS))
    forms, seen = [], set()
    while len(forms) < 50:
        t = random_query(rng, STATES, CITIES, RIVERS)
        if mrl(t) not in seen:
            seen.add(mrl(t))
            forms.append(t)
    for i, t in enumerate(forms):
        text += record(i + 1, "en", preorder(t, "en"), t)
    return text


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data"))
    ap.add_argument("--geo-size", type=int, default=120)
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "toy_deterministic.txt").write_text(toy_deterministic(random.Random(7)))
    (out / "geo_synthetic.txt").write_text(geo_synthetic(random.Random(11), args.geo_size))
    (out / "mrl_fixture.txt").write_text(mrl_fixture(random.Random(13)))


if __name__ == "__main__":
    main()
