"""Run the whole engine end to end, with and without context rejection.

Generates a small synthetic benchmark (a planted mixture of contexts that do
and do not express the relation), runs both configurations, and compares the
reports. The rejected pairs emit explicit no-answers, which is exactly what
the invalid contexts need, so rejection lifts F1.
"""
import json
import math
import tempfile
from pathlib import Path

from clozefill import RunConfig, run
from clozefill.pipeline import ReferenceBackendConfig

workdir = Path(tempfile.mkdtemp(prefix="clozefill_demo_"))
print("writing synthetic benchmark to", workdir)

(workdir / "templates.tsv").write_text("employed_by\t[SUB] works for [OBJ]\n")

# vector table: "works"/"for" are the scored template words; valid contexts
# contain a word close to them, invalid contexts only a distant one
lines = ["works 1 0 0", "for 0.9 0.43589 0"]
for i in range(14):
    theta = 2 * math.pi * i / 14
    lines.append(f"job{i} 0.8 {0.6 * math.cos(theta)!r} {0.6 * math.sin(theta)!r}")
for j in range(6):
    theta = 2 * math.pi * j / 6
    lines.append(f"misc{j} 0.1 {0.99499 * math.cos(theta)!r} {0.99499 * math.sin(theta)!r}")
(workdir / "vectors.txt").write_text("\n".join(lines) + "\n")

# reference backend: employers get most of the unigram mass
vocabulary = {f"acme{j}": 10.0 for j in range(5)} | {f"alt{j}": 1.0 for j in range(5)}
(workdir / "backend.json").write_text(
    json.dumps({"dimension": 128, "seed": 29, "vocabulary": vocabulary})
)

records = []
for i in range(14):  # valid: the employer sits at position 0
    records.append(
        {
            "relation": "employed_by",
            "subject": [f"person{i}"],
            "context": [f"acme{i % 5}", f"job{i}", f"note{i}"],
            "gold": {"span": [0, 1]},
        }
    )
for j in range(6):  # invalid: no employment evidence, answer is "no answer"
    records.append(
        {
            "relation": "employed_by",
            "subject": [f"person{14 + j}"],
            "context": [f"misc{j}", f"chatter{j}", f"stuff{j}"],
            "gold": None,
        }
    )
with open(workdir / "dataset.jsonl", "w") as handle:
    for record in records:
        handle.write(json.dumps(record) + "\n")

common = dict(
    templates_path=workdir / "templates.tsv",
    dataset_path=workdir / "dataset.jsonl",
    embeddings_path=workdir / "vectors.txt",
    backend=ReferenceBackendConfig(fixture_path=workdir / "backend.json"),
    k=10,
    rejection_lambda=1.0,
)

for label, enabled in (("with rejection", True), ("without rejection", False)):
    summary = run(
        RunConfig(**common, rejection_enabled=enabled, output_dir=workdir / label.replace(" ", "_"))
    )
    counts = summary.manifest["counts"]
    print(
        f"\n{label}: accepted {counts['accepted']}/{counts['pairs']} pairs, "
        f"forward passes {summary.manifest['provider']['forward_passes']}"
    )
    print(f"  macro EM {summary.report.macro_em:.3f}   macro F1 {summary.report.macro_f1:.3f}")

print("\nartifacts per run: extractions.jsonl, report.json/.txt/.csv, manifest.json")
