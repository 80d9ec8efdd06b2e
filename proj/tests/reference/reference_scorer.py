# Copyright 2026 The Panocap Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Reference caption-metric scorer.

Independent Python implementations of BLEU@4, ROUGE-L, METEOR (exact+stem)
and CIDEr-D under the toolkit's pinned definitions. Used to generate the
frozen metric-parity fixture consumed by the C++ test suite:

    python3 reference_scorer.py --generate ../fixtures/metric_parity.json
"""

import argparse
import json
import math
import random


def tokenize(text):
    tokens = []
    cur = []
    for ch in text:
        if ch.isascii() and ch.isalnum():
            cur.append(ch.lower())
        elif ch == "'" and cur:
            cur.append(ch)
        else:
            if cur:
                word = "".join(cur).strip("'")
                if word:
                    tokens.append(word)
            cur = []
    if cur:
        word = "".join(cur).strip("'")
        if word:
            tokens.append(word)
    return tokens


class Porter:
    """Classic Porter (1980) stemmer, after the public-domain C original."""

    def stem(self, word):
        if len(word) <= 2:
            return word
        self.b = list(word)
        self.k = len(word) - 1
        self.j = 0
        self._step1ab()
        self._step1c()
        self._step2()
        self._step3()
        self._step4()
        self._step5()
        return "".join(self.b[: self.k + 1])

    def _cons(self, i):
        ch = self.b[i]
        if ch in "aeiou":
            return False
        if ch == "y":
            return True if i == 0 else not self._cons(i - 1)
        return True

    def _m(self):
        n = 0
        i = 0
        while True:
            if i > self.j:
                return n
            if not self._cons(i):
                break
            i += 1
        i += 1
        while True:
            while True:
                if i > self.j:
                    return n
                if self._cons(i):
                    break
                i += 1
            i += 1
            n += 1
            while True:
                if i > self.j:
                    return n
                if not self._cons(i):
                    break
                i += 1
            i += 1

    def _vowel_in_stem(self):
        return any(not self._cons(i) for i in range(self.j + 1))

    def _doublec(self, i):
        if i < 1 or self.b[i] != self.b[i - 1]:
            return False
        return self._cons(i)

    def _cvc(self, i):
        if i < 2 or not self._cons(i) or self._cons(i - 1) or not self._cons(i - 2):
            return False
        return self.b[i] not in "wxy"

    def _ends(self, s):
        length = len(s)
        if length > self.k + 1:
            return False
        if "".join(self.b[self.k + 1 - length : self.k + 1]) != s:
            return False
        self.j = self.k - length
        return True

    def _setto(self, s):
        self.b[self.j + 1 : self.k + 1] = list(s)
        self.k = self.j + len(s)

    def _r(self, s):
        if self._m() > 0:
            self._setto(s)

    def _step1ab(self):
        if self.b[self.k] == "s":
            if self._ends("sses"):
                self.k -= 2
            elif self._ends("ies"):
                self._setto("i")
            elif self.b[self.k - 1] != "s":
                self.k -= 1
        if self._ends("eed"):
            if self._m() > 0:
                self.k -= 1
        elif (self._ends("ed") or self._ends("ing")) and self._vowel_in_stem():
            self.k = self.j
            if self._ends("at"):
                self._setto("ate")
            elif self._ends("bl"):
                self._setto("ble")
            elif self._ends("iz"):
                self._setto("ize")
            elif self._doublec(self.k):
                if self.b[self.k] not in "lsz":
                    self.k -= 1
            else:
                self.j = self.k
                if self._m() == 1 and self._cvc(self.k):
                    self._setto("e")

    def _step1c(self):
        if self._ends("y") and self._vowel_in_stem():
            self.b[self.k] = "i"

    def _step2(self):
        if self.k < 1:
            return
        rules = {
            "a": (("ational", "ate"), ("tional", "tion")),
            "c": (("enci", "ence"), ("anci", "ance")),
            "e": (("izer", "ize"),),
            "l": (("bli", "ble"), ("alli", "al"), ("entli", "ent"),
                  ("eli", "e"), ("ousli", "ous")),
            "o": (("ization", "ize"), ("ation", "ate"), ("ator", "ate")),
            "s": (("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
                  ("ousness", "ous")),
            "t": (("aliti", "al"), ("iviti", "ive"), ("biliti", "ble")),
            "g": (("logi", "log"),),
        }
        for suffix, repl in rules.get(self.b[self.k - 1], ()):
            if self._ends(suffix):
                self._r(repl)
                return

    def _step3(self):
        rules = {
            "e": (("icate", "ic"), ("ative", ""), ("alize", "al")),
            "i": (("iciti", "ic"),),
            "l": (("ical", "ic"), ("ful", "")),
            "s": (("ness", ""),),
        }
        for suffix, repl in rules.get(self.b[self.k], ()):
            if self._ends(suffix):
                self._r(repl)
                return

    def _step4(self):
        if self.k < 1:
            return
        rules = {
            "a": ("al",),
            "c": ("ance", "ence"),
            "e": ("er",),
            "i": ("ic",),
            "l": ("able", "ible"),
            "n": ("ant", "ement", "ment", "ent"),
            "o": ("ion", "ou"),
            "s": ("ism",),
            "t": ("ate", "iti"),
            "u": ("ous",),
            "v": ("ive",),
            "z": ("ize",),
        }
        for suffix in rules.get(self.b[self.k - 1], ()):
            if self._ends(suffix):
                if suffix == "ion" and not (
                    self.j >= 0 and self.b[self.j] in "st"
                ):
                    continue
                if self._m() > 1:
                    self.k = self.j
                return

    def _step5(self):
        self.j = self.k
        if self.b[self.k] == "e":
            a = self._m()
            if a > 1 or (a == 1 and not self._cvc(self.k - 1)):
                self.k -= 1
        if self.b[self.k] == "l" and self._doublec(self.k) and self._m() > 1:
            self.k -= 1


def ngrams(tokens, n):
    counts = {}
    for i in range(len(tokens) - n + 1):
        key = tuple(tokens[i : i + n])
        counts[key] = counts.get(key, 0) + 1
    return counts


def bleu4(candidate, references):
    if not candidate:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        cand = ngrams(candidate, n)
        total = sum(cand.values())
        hits = 0
        for gram, count in cand.items():
            best = max((ngrams(ref, n).get(gram, 0) for ref in references),
                       default=0)
            hits += min(count, best)
        if hits == 0 or total == 0:
            return 0.0
        log_sum += math.log(hits / total)
    diffs = sorted((abs(len(r) - len(candidate)), len(r)) for r in references)
    ref_len = diffs[0][1]
    bp = 1.0 if len(candidate) >= ref_len else math.exp(1.0 - ref_len / len(candidate))
    return bp * math.exp(log_sum / 4.0)


def lcs(a, b):
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[-1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate, references, beta=1.2):
    if not candidate:
        return 0.0
    best = 0.0
    for ref in references:
        if not ref:
            continue
        ll = lcs(candidate, ref)
        if ll == 0:
            continue
        p = ll / len(candidate)
        r = ll / len(ref)
        f = (1 + beta * beta) * p * r / (r + beta * beta * p)
        best = max(best, f)
    return best


_PORTER = Porter()


def _meteor_stage(cand_keys, ref_keys, matched, ref_used):
    prev = -2
    for i, key in enumerate(cand_keys):
        if matched[i] != -1:
            continue
        pick = -1
        nxt = prev + 1
        if 0 <= nxt < len(ref_keys) and not ref_used[nxt] and ref_keys[nxt] == key:
            pick = nxt
        else:
            for j, rkey in enumerate(ref_keys):
                if not ref_used[j] and rkey == key:
                    pick = j
                    break
        if pick != -1:
            matched[i] = pick
            ref_used[pick] = True
            prev = pick


def meteor(candidate, references, alpha=0.9, gamma=0.5, beta=3.0):
    if not candidate:
        return 0.0
    best = 0.0
    for ref in references:
        if not ref:
            continue
        matched = [-1] * len(candidate)
        ref_used = [False] * len(ref)
        _meteor_stage(candidate, ref, matched, ref_used)
        cstems = [_PORTER.stem(t) for t in candidate]
        rstems = [_PORTER.stem(t) for t in ref]
        _meteor_stage(cstems, rstems, matched, ref_used)
        matches = sum(1 for m in matched if m != -1)
        if matches == 0:
            continue
        chunks = 0
        prev_ref = -2
        in_chunk = False
        for m in matched:
            if m == -1:
                in_chunk = False
                continue
            if not in_chunk or m != prev_ref + 1:
                chunks += 1
            in_chunk = True
            prev_ref = m
        p = matches / len(candidate)
        r = matches / len(ref)
        f = p * r / (alpha * p + (1 - alpha) * r)
        penalty = gamma * (chunks / matches) ** beta
        best = max(best, f * (1 - penalty))
    return best


def build_df(reference_sets):
    df = [dict() for _ in range(4)]
    for refs in reference_sets:
        seen = [set() for _ in range(4)]
        for ref in refs:
            for n in range(1, 5):
                seen[n - 1].update(ngrams(ref, n).keys())
        for n in range(4):
            for gram in seen[n]:
                df[n][gram] = df[n].get(gram, 0) + 1
    return df, len(reference_sets)


def _tfidf(tokens, df, doc_count):
    vecs, norms = [], []
    log_n = math.log(doc_count)
    for n in range(1, 5):
        vec = {}
        for gram, count in ngrams(tokens, n).items():
            d = math.log(max(1.0, df[n - 1].get(gram, 0)))
            vec[gram] = count * (log_n - d)
        vecs.append(vec)
        norms.append(math.sqrt(sum(w * w for w in vec.values())))
    return vecs, norms


def cider_d(candidate, references, df, doc_count, sigma=6.0, scale=10.0):
    cvecs, cnorms = _tfidf(candidate, df, doc_count)
    totals = [0.0] * 4
    for ref in references:
        rvecs, rnorms = _tfidf(ref, df, doc_count)
        delta = len(candidate) - len(ref)
        penalty = math.exp(-delta * delta / (2 * sigma * sigma))
        for n in range(4):
            dot = sum(
                min(w, rvecs[n][g]) * rvecs[n][g]
                for g, w in cvecs[n].items()
                if g in rvecs[n]
            )
            if cnorms[n] > 0 and rnorms[n] > 0:
                totals[n] += penalty * dot / (cnorms[n] * rnorms[n])
    return scale * sum(t / len(references) for t in totals) / 4


VOCAB = [
    "person", "woman", "man", "child", "dog", "cat", "car", "bus", "bicycle",
    "table", "chair", "umbrella", "jacket", "shirt", "hat", "boots", "tree",
    "grass", "snow", "mountain", "road", "building", "window", "wall", "sky",
    "red", "blue", "green", "black", "white", "wooden", "metal", "striped",
    "large", "small", "tall", "round", "shiny", "dark", "bright",
    "is", "are", "wearing", "holding", "standing", "sitting", "riding",
    "walking", "running", "leaning", "skiing", "parked", "covered", "placed",
    "the", "a", "an", "on", "in", "near", "beside", "behind", "with", "and",
    "happily", "quietly", "partially", "slightly", "left", "right", "front",
]


def make_caption(rng, length):
    return " ".join(rng.choice(VOCAB) for _ in range(length)) + "."


def perturb(rng, caption):
    tokens = caption.rstrip(".").split()
    ops = rng.randint(0, 4)
    for _ in range(ops):
        mode = rng.randrange(3)
        if mode == 0 and len(tokens) > 3:
            tokens.pop(rng.randrange(len(tokens)))
        elif mode == 1:
            tokens[rng.randrange(len(tokens))] = rng.choice(VOCAB)
        else:
            i = rng.randrange(len(tokens))
            j = rng.randrange(len(tokens))
            tokens[i], tokens[j] = tokens[j], tokens[i]
    return " ".join(tokens) + "."


def generate(path, pairs=100, seed=20260823):
    rng = random.Random(seed)
    records = []
    for i in range(pairs):
        ref = make_caption(rng, rng.randint(4, 26))
        if i % 10 == 0:
            cand = ref  # identical pair
        elif i % 10 == 9:
            cand = make_caption(rng, rng.randint(4, 26))  # unrelated pair
        else:
            cand = perturb(rng, ref)
        records.append({"candidate": cand, "references": [ref]})

    reference_sets = [[tokenize(r) for r in rec["references"]] for rec in records]
    df, doc_count = build_df(reference_sets)
    for rec, refs in zip(records, reference_sets):
        cand = tokenize(rec["candidate"])
        rec["bleu4"] = bleu4(cand, refs)
        rec["rouge_l"] = rouge_l(cand, refs)
        rec["meteor"] = meteor(cand, refs)
        rec["cider_d"] = cider_d(cand, refs, df, doc_count)

    with open(path, "w") as f:
        json.dump({"seed": seed, "pairs": records}, f, indent=1)
    print(f"wrote {len(records)} pairs to {path}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--generate", metavar="PATH",
                    help="write the metric-parity fixture")
    ap.add_argument("--pairs", type=int, default=100)
    ap.add_argument("--seed", type=int, default=20260823)
    args = ap.parse_args()
    if args.generate:
        generate(args.generate, args.pairs, args.seed)
    else:
        ap.error("nothing to do; pass --generate")


if __name__ == "__main__":
    main()
