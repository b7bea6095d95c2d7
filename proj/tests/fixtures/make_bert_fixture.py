#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Builds tests/fixtures/tiny_bert: a randomly initialised BERT in the Hugging
Face layout plus reference tokenizations and pooled outputs computed by the
transformers library. Re-run only to regenerate the frozen fixture."""

import json
import pathlib

import torch
from transformers import BertConfig, BertModel, BertTokenizer

OUT = pathlib.Path(__file__).resolve().parent / "tiny_bert"

WORDS = """the a of with and was were in to for patients study health quality life
index measure measured questionnaire eq 5d 5l 3l utility score scores correlated
wellbeing global qol apparent although some differences trial group groups
insulin metformin diabetes asthma entity ents treatment outcome outcomes baseline
week weeks month months data results""".split()

TEXTS = [
    "This index was found to be highly correlated with a measure of health (EQ-5D).",
    "EQ-5D was used. [ENTS: EQ-5D|ENTITY]",
    "Utility scores, measured at baseline; were correlated!",
    "Patients with diabetes received insulin for 12 weeks.",
    "unknownword qolx wellbeingness",
]


def main():
    torch.manual_seed(1234)
    OUT.mkdir(parents=True, exist_ok=True)
    chars = sorted(set("".join(WORDS)) | set("0123456789"))
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    vocab += sorted(set(WORDS))
    vocab += [c for c in chars if c not in vocab] + ["##" + c for c in chars]
    vocab += list(".,;:!?()[]|-")
    (OUT / "vocab.txt").write_text("\n".join(vocab) + "\n")

    config = BertConfig(vocab_size=len(vocab), hidden_size=16, num_hidden_layers=2, num_attention_heads=2,
                        intermediate_size=32, max_position_embeddings=64, type_vocab_size=2,
                        hidden_act="gelu", layer_norm_eps=1e-12)
    model = BertModel(config, add_pooling_layer=True)
    with torch.no_grad():
        for p in model.parameters():
            p.copy_(torch.randn_like(p) * 0.2)
    model.eval()
    config.save_pretrained(OUT)
    (OUT / "tokenizer_config.json").write_text(json.dumps({"do_lower_case": True}))

    from safetensors.torch import save_file
    state = {"bert." + k: v.detach().to(torch.float32).contiguous() for k, v in model.state_dict().items()
             if "position_ids" not in k}
    save_file(state, str(OUT / "model.safetensors"), metadata={"format": "pt"})

    tok = BertTokenizer(str(OUT / "vocab.txt"), do_lower_case=True)
    model = model.double()
    with torch.no_grad():
        for k, v in model.state_dict().items():
            if "bert." + k in state:
                v.copy_(state["bert." + k].double())
    cases = []
    for text in TEXTS:
        ids = tok(text, truncation=True, max_length=24)["input_ids"]
        with torch.no_grad():
            out = model(input_ids=torch.tensor([ids]))
        cases.append({"text": text,
                      "pieces": tok.tokenize(text),
                      "input_ids": ids,
                      "first_token": out.last_hidden_state[0, 0].tolist(),
                      "pooled": out.pooler_output[0].tolist()})
    (OUT / "reference.json").write_text(json.dumps({"max_len": 24, "cases": cases}, indent=1))


if __name__ == "__main__":
    main()
