#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Stand-in for the scispaCy bridge used by the tests. Sentences end at ". ";
entities are the words listed in --terms. Offsets are UTF-8 byte offsets."""

import argparse
import json
import re
import sys


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--terms", default="EQ-5D,health,Ångström")
    p.add_argument("--mode", default="abstract")
    p.add_argument("--check", action="store_true")
    p.add_argument("--fail-check", action="store_true")
    a = p.parse_args()
    if a.check:
        if a.fail_check:
            sys.stderr.write("model not installed\n")
            sys.exit(4)
        print(json.dumps({"pipeline": "fake_sci", "version": "1.2.3"}))
        return
    terms = [t for t in a.terms.split(",") if t]
    for line in sys.stdin:
        if not line.strip():
            continue
        req = json.loads(line)
        text = req["text"]
        parts = [text] if a.mode == "sentence" else [s for s in re.split(r"(?<=\.)\s+", text) if s.strip()]
        sentences = []
        for s in parts:
            ents = []
            for t in terms:
                for m in re.finditer(re.escape(t), s):
                    ents.append({"start": len(s[:m.start()].encode()), "end": len(s[:m.end()].encode()),
                                 "label": "ENTITY"})
            sentences.append({"text": s, "entities": ents})
        print(json.dumps({"id": req["id"], "sentences": sentences}, ensure_ascii=False))


if __name__ == "__main__":
    main()
