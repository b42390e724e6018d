"""Screen candidate contexts before extraction.

Each context is scored by how well every filled-template word is covered by
some context word, measured as the best cosine similarity between pretrained
word vectors (a practical stand-in for pointwise mutual information). Scores
are thresholded at mean - lambda * stddev: pairs below go to the reject
cluster and the engine emits "no answer" for them.
"""
import io

from clozefill import fit_threshold, load_embeddings, partition, score_pair, substitute_subject
from clozefill import parse_template
from clozefill.rejection import RejectionScore

# a toy vector table; real runs load fastText-style text files
vectors = io.StringIO(
    "\n".join(
        [
            "drafted 1.0 0.0 0.0",
            "picked 0.9 0.43589 0.0",  # close to "drafted"
            "warriors 0.0 1.0 0.0",
            "team 0.1 0.99499 0.0",
            "weather 0.0 0.0 1.0",
            "sunny 0.05 0.0 0.99875",
        ]
    )
)
table = load_embeddings(vectors)

template = parse_template("[SUB] drafted by [OBJ]")
filled = substitute_subject(template, ("curry",))

contexts = [
    ("warriors", "drafted", "curry"),   # expresses the relation
    ("team", "picked", "curry"),        # paraphrase, still close
    ("weather", "sunny", "today"),      # unrelated
    ("warriors", "team", "roster"),     # mentions the team but not the event
]

scores = []
for index, context in enumerate(contexts):
    value = score_pair(table, context, filled)
    scores.append(RejectionScore(pair_index=index, value=value))
    print(f"context {index}: {' '.join(context):30s} score = {value:+.4f}")

threshold = fit_threshold(scores, lam=1.0)
print(f"\nmean = {threshold.mean:.4f}, stddev = {threshold.stddev:.4f}")
print(f"epsilon = mean - 1.0 * stddev = {threshold.epsilon:.4f}")

split = partition(scores, threshold)
print("accepted:", [" ".join(contexts[i]) for i in split.accepted])
print("rejected:", [" ".join(contexts[i]) for i in split.rejected])
