"""Tune the rejection threshold on a labeled development split.

The rejection lambda trades recall for precision: too strict and answerable
pairs get thrown away, too loose and junk contexts reach extraction. With
rejection_lambda="tune" the pipeline grid-searches {0, 0.5, ..., 3} per
relation on dev F1 (and can tune the expansion flag the same way).
"""
import json
import math
import tempfile
from pathlib import Path

from clozefill import RunConfig, run
from clozefill.pipeline import ReferenceBackendConfig

workdir = Path(tempfile.mkdtemp(prefix="clozefill_tune_"))

(workdir / "templates.tsv").write_text("capital_of\t[SUB] is the capital of [OBJ]\n")

# single-token contexts whose cosine against "capital" IS the pair's score:
# six answerable pairs at 0.7 and two outliers at 0.2 that are still
# answerable, so only a loose threshold (lambda = 2) keeps them all
lines = ["capital 1 0"]
for i in range(6):
    lines.append(f"strong{i} 0.7 {math.sqrt(1 - 0.49)!r}")
for j in range(2):
    lines.append(f"weak{j} 0.2 {math.sqrt(1 - 0.04)!r}")
(workdir / "vectors.txt").write_text("\n".join(lines) + "\n")

words = [f"strong{i}" for i in range(6)] + ["weak0", "weak1"]
(workdir / "backend.json").write_text(
    json.dumps({"dimension": 64, "seed": 3, "vocabulary": {w: 10.0 for w in words} | {"alt": 1.0}})
)

records = [
    {"relation": "capital_of", "subject": [f"city{i}"], "context": [w], "gold": {"span": [0, 1]}}
    for i, w in enumerate(words)
]
(workdir / "dev.jsonl").write_text("\n".join(json.dumps(r) for r in records) + "\n")

summary = run(
    RunConfig(
        templates_path=workdir / "templates.tsv",
        dataset_path=workdir / "dev.jsonl",
        dev_dataset_path=workdir / "dev.jsonl",
        embeddings_path=workdir / "vectors.txt",
        backend=ReferenceBackendConfig(fixture_path=workdir / "backend.json"),
        k=9,
        rejection_lambda="tune",
        expansion="never",
        output_dir=workdir / "out",
    )
)

chosen = summary.manifest["relation_settings"]["capital_of"]
print(f"tuned lambda: {chosen['lambda']}  (expansion: {chosen['expand']})")
print(f"dev-tuned run macro F1: {summary.report.macro_f1:.3f}")
print("\nany stricter lambda rejects the two weak-but-answerable pairs;")
print("the grid search lands on the smallest lambda that keeps them.")
