"""Fetch and normalize a small pretrained masked-LM checkpoint.

The vendored models/bert-tiny was produced by this script (source:
prajjwal1/bert-tiny). Old checkpoints often lack pieces that current
transformers versions require, so after download the script:
  - adds "model_type" to config.json when missing,
  - builds tokenizer.json from vocab.txt when no fast serialization ships,
  - re-saves weights as safetensors (drops unused heads, no pickle).

Usage:
    python scripts/fetch_model.py prajjwal1/bert-tiny models/bert-tiny
Set HF_ENDPOINT when the default hub is unreachable (e.g. a corporate
mirror's huggingface proxy).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


def normalize(raw_dir: Path, out_dir: Path, model_type: str) -> None:
    config_path = raw_dir / "config.json"
    config = json.loads(config_path.read_text(encoding="utf-8"))
    if "model_type" not in config:
        config["model_type"] = model_type
        config_path.write_text(json.dumps(config, indent=1), encoding="utf-8")

    if not (raw_dir / "tokenizer.json").exists() and (raw_dir / "vocab.txt").exists():
        from tokenizers.implementations import BertWordPieceTokenizer

        tok = BertWordPieceTokenizer(str(raw_dir / "vocab.txt"), lowercase=True)
        tok.save(str(raw_dir / "tokenizer.json"))
        (raw_dir / "tokenizer_config.json").write_text(
            json.dumps(
                {
                    "tokenizer_class": "BertTokenizer",
                    "do_lower_case": True,
                    "model_max_length": config.get("max_position_embeddings", 512),
                    "unk_token": "[UNK]",
                    "sep_token": "[SEP]",
                    "pad_token": "[PAD]",
                    "cls_token": "[CLS]",
                    "mask_token": "[MASK]",
                }
            ),
            encoding="utf-8",
        )

    from transformers import AutoModelForMaskedLM, AutoTokenizer

    model = AutoModelForMaskedLM.from_pretrained(raw_dir)
    model.save_pretrained(out_dir)
    AutoTokenizer.from_pretrained(raw_dir).save_pretrained(out_dir)
    print(f"normalized checkpoint written to {out_dir}")


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("model_id")
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--model-type", default="bert")
    args = parser.parse_args()

    from huggingface_hub import snapshot_download

    raw_dir = Path(snapshot_download(args.model_id))
    normalize(raw_dir, args.out_dir, args.model_type)
    return 0


if __name__ == "__main__":
    sys.exit(main())
