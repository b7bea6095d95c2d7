#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""JSON-lines bridge between eq5d and a scispaCy pipeline.

Reads {"id", "text"} objects from stdin and writes one
{"id", "sentences": [{"text", "entities": [{"start", "end", "label"}]}]}
object per input line. Offsets are UTF-8 byte offsets into the sentence text.
"""

import argparse
import json
import sys


def byte_offset(text, char_index):
    return len(text[:char_index].encode("utf-8"))


def load(model):
    try:
        import spacy
    except ImportError as exc:
        sys.stderr.write(f"spacy is not installed: {exc}\n")
        sys.exit(3)
    try:
        return spacy, spacy.load(model)
    except OSError as exc:
        sys.stderr.write(f"model {model} is not installed: {exc}\n")
        sys.exit(4)


def sentence_record(span):
    text = span.text
    ents = []
    for ent in span.ents:
        start = ent.start_char - span.start_char
        end = ent.end_char - span.start_char
        ents.append({"start": byte_offset(text, start), "end": byte_offset(text, end), "label": ent.label_})
    return {"text": text, "entities": ents}


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--model", required=True)
    parser.add_argument("--mode", choices=["abstract", "sentence"], default="abstract")
    parser.add_argument("--check", action="store_true")
    args = parser.parse_args()

    spacy, nlp = load(args.model)
    if args.check:
        version = nlp.meta.get("version", "unknown")
        print(json.dumps({"pipeline": args.model, "version": f"{version} (spacy {spacy.__version__})"}))
        return

    for line in sys.stdin:
        if not line.strip():
            continue
        req = json.loads(line)
        doc = nlp(req["text"])
        if args.mode == "sentence":
            sentences = [sentence_record(doc[:])]
        else:
            sentences = [sentence_record(s) for s in doc.sents if s.text.strip()]
        sys.stdout.write(json.dumps({"id": req["id"], "sentences": sentences}) + "\n")


if __name__ == "__main__":
    main()
