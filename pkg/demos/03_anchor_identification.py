"""Constrain masked-token predictions to the context.

The language model predicts a distribution over its whole vocabulary for the
masked object slot. Instead of trusting the raw top prediction (which may
not appear in the evidence), the probability mass of the top-k candidates is
redistributed onto context positions through embedding compatibility, and
the highest-mass position becomes the anchor token.

This demo uses the deterministic reference backend, so the numbers are
reproducible and small enough to follow by hand.
"""
from clozefill import anchor, propose
from clozefill.anchor import combine_rows
from clozefill.model import EntityContextPair
from clozefill.provider import ReferenceBackend
from clozefill.templating import build_query, parse_template

# unigram weights stand in for the LM's masked-slot distribution
backend = ReferenceBackend(
    {"warriors": 8.0, "lakers": 3.0, "roster": 2.0, ",": 2.0, "draft": 1.0},
    dimension=64,
    seed=11,
)

pair = EntityContextPair(
    relation_id="drafted_by",
    entity=("curry",),
    context=("the", "warriors", "drafted", "curry"),
)
query = build_query(pair, parse_template("[SUB] drafted by [OBJ]"), backend.mask_token())
print("query:", " ".join(query.tokens))

proposal = propose(backend, query, k=5)
print("\nproposals after punctuation filtering:")
for token, prob in proposal.candidates:
    print(f"  {token:10s} p = {prob:.3f}")

backend.reset_stats()
result = anchor(backend, query, k=5)
mass = combine_rows(result.proposal, result.rows)

print("\nredistributed mass per context position:")
for i, token in enumerate(pair.context):
    marker = "  <-- anchor" if i == result.position else ""
    print(f"  {i}: {token:10s} {mass[i]:.4f}{marker}")

print(f"\nanchor token: {pair.context[result.position]!r}")
print(f"forward passes: {backend.stats.forward_passes} (budget k+1 = 6, "
      f"one saved by the filtered comma)")
