import math

import numpy as np
import pytest

from clozefill.anchor import (
    anchor,
    combine_rows,
    compatibility,
    propose,
)
from clozefill.errors import EmptyProposal
from clozefill.model import ClozeQuery, is_punctuation
from clozefill.provider import (
    ContextualEmbeddingSequence,
    LanguageModelProvider,
    MaskedDistribution,
    ReferenceBackend,
)

MASK = "[MASK]"


from oracles import exhaustive_anchor_oracle


def make_query(context, template_tail):
    """Assemble a query whose tail already contains the mask token."""
    tokens = tuple(context) + tuple(template_tail)
    return ClozeQuery(tokens=tokens, context_len=len(context), mask_index=tokens.index(MASK))


class ScriptedProvider(LanguageModelProvider):
    """Provider with hand-prescribed distribution and embedding function."""

    def __init__(self, distribution, vector_fn, dimension):
        super().__init__()
        self._distribution = distribution
        self._vector_fn = vector_fn
        self._dimension = dimension

    def mask_token(self):
        return MASK

    def topk_mask(self, query, k):
        self._count_pass()
        return MaskedDistribution(candidates=self._distribution[:k])

    def embed_sequence(self, tokens):
        self._count_pass()
        vectors = np.stack([self._vector_fn(tok, i) for i, tok in enumerate(tokens)])
        return ContextualEmbeddingSequence(dimension=self._dimension, vectors=vectors)


class TestPropose:
    def backend(self):
        return ReferenceBackend(
            {"Warriors": 6.0, ",": 2.0, "Lakers": 1.0, "x": 1.0}, dimension=8, seed=1
        )

    def test_punctuation_removed_without_renormalizing(self):
        query = make_query(("x",), ("e", MASK))
        proposal = propose(self.backend(), query, k=3)
        assert proposal.candidates == (("Warriors", 0.6), ("Lakers", 0.1))

    def test_no_punctuation_is_identity(self):
        backend = ReferenceBackend({"a": 3.0, "b": 1.0}, dimension=8, seed=1)
        query = make_query(("x",), ("e", MASK))
        proposal = propose(backend, query, k=2)
        assert proposal.candidates == (("a", 0.75), ("b", 0.25))

    def test_all_punctuation_raises(self):
        backend = ReferenceBackend({",": 1.0, ".": 1.0, "!": 2.0}, dimension=8, seed=1)
        query = make_query(("x",), ("e", MASK))
        with pytest.raises(EmptyProposal):
            propose(backend, query, k=3)


class TestCompatibility:
    def test_constant_row_softmaxes_to_uniform(self):
        provider = ScriptedProvider(
            distribution=(("v", 1.0),),
            vector_fn=lambda tok, pos: np.array([1.0, 0.0]),
            dimension=2,
        )
        query = make_query(("a", "b", "c", "d"), ("e", MASK))
        row = compatibility(provider, query, "v")
        assert row.normalized == pytest.approx((0.25, 0.25, 0.25, 0.25), abs=1e-12)

    def test_single_position_context(self):
        backend = ReferenceBackend({"a": 1.0}, dimension=8, seed=0)
        query = make_query(("only",), ("e", MASK))
        row = compatibility(backend, query, "a")
        assert row.normalized == pytest.approx((1.0,), abs=1e-12)

    def test_matches_manual_cosine_softmax(self):
        backend = ReferenceBackend({"a": 1.0, "b": 1.0}, dimension=16, seed=9)
        query = make_query(("p", "q", "r"), ("ent", "rel", MASK))
        row = compatibility(backend, query, "b")

        seq = list(query.tokens)
        seq[query.mask_index] = "b"
        emb = backend.embed_sequence(tuple(seq))
        slot = emb.vectors[query.mask_index]

        def manual_cos(x, y):
            return float(
                sum(a * b for a, b in zip(x, y))
                / (math.sqrt(sum(a * a for a in x)) * math.sqrt(sum(b * b for b in y)))
            )

        raw = [manual_cos(emb.vectors[i], slot) for i in range(3)]
        peak = max(raw)
        exps = [math.exp(v - peak) for v in raw]
        expected = [e / sum(exps) for e in exps]
        assert row.unnormalized == pytest.approx(tuple(raw), abs=1e-9)
        assert row.normalized == pytest.approx(tuple(expected), abs=1e-9)

    def test_normalized_sums_to_one(self):
        backend = ReferenceBackend({"a": 1.0, "b": 2.0, "c": 3.0}, dimension=8, seed=4)
        query = make_query(("w1", "w2", "w3", "w4", "w5"), ("ent", MASK, "tail"))
        for candidate in ("a", "b", "c"):
            row = compatibility(backend, query, candidate)
            assert sum(row.normalized) == pytest.approx(1.0, abs=1e-9)


class TestAnchor:
    def test_single_position_context_always_position_zero(self):
        backend = ReferenceBackend({"a": 5.0, "b": 1.0}, dimension=8, seed=2)
        query = make_query(("lonely",), ("ent", "rel", MASK))
        assert anchor(backend, query, k=2).position == 0

    def test_mass_concentates_on_matching_parity_token(self):
        # mask lands at an odd index; "a" at context position 1 shares parity,
        # so the top-weighted candidate "a" pulls the anchor there
        backend = ReferenceBackend({"a": 50.0, "b": 1.0, "c": 1.0}, dimension=64, seed=5)
        query = make_query(("x", "a", "y"), ("e", "r", MASK))
        assert query.mask_index % 2 == 1
        result = anchor(backend, query, k=3)
        oracle_position, oracle_mass = exhaustive_anchor_oracle(backend, query)
        assert result.position == oracle_position == 1
        assert result.score == pytest.approx(oracle_mass[1], abs=1e-9)

    def test_exhaustive_equivalence_randomized(self):
        rng = np.random.default_rng(100)
        words = [f"w{i}" for i in range(60)] + [",", ".", ";"]
        for trial in range(20):
            vocab_size = int(rng.integers(2, 20))
            chosen = rng.choice(words, size=vocab_size, replace=False)
            vocabulary = {str(t): float(rng.uniform(0.5, 10)) for t in chosen}
            if all(is_punctuation(t) for t in vocabulary):
                vocabulary["safe"] = 1.0
            backend = ReferenceBackend(vocabulary, dimension=int(rng.integers(4, 16)), seed=trial)
            n_ctx = int(rng.integers(1, 12))
            context = [str(t) for t in rng.choice(words, size=n_ctx)]
            tail = ["ent", "rel", MASK]
            query = make_query(context, tail)
            result = anchor(backend, query, k=len(vocabulary))
            oracle_position, oracle_mass = exhaustive_anchor_oracle(backend, query)
            assert result.position == oracle_position
            assert result.score == pytest.approx(oracle_mass[oracle_position], abs=1e-9)

    def test_forward_pass_budget_exact_without_filtering(self):
        backend = ReferenceBackend({f"w{i}": float(i + 1) for i in range(10)}, dimension=8, seed=6)
        query = make_query(("c1", "c2", "c3"), ("e", MASK))
        for k in (1, 4, 10):
            backend.reset_stats()
            anchor(backend, query, k=k)
            assert backend.stats.forward_passes == k + 1

    def test_forward_pass_budget_below_with_filtering(self):
        vocabulary = {"w1": 5.0, ",": 4.0, ".": 3.0, "w2": 1.0}
        backend = ReferenceBackend(vocabulary, dimension=8, seed=6)
        query = make_query(("c1", "c2"), ("e", MASK))
        backend.reset_stats()
        anchor(backend, query, k=4)
        # two of the four proposals are punctuation: 1 + 2 embeds
        assert backend.stats.forward_passes == 3 <= 5

    def test_workers_do_not_change_result(self):
        backend_a = ReferenceBackend({f"w{i}": float(i + 1) for i in range(8)}, dimension=8, seed=7)
        backend_b = ReferenceBackend({f"w{i}": float(i + 1) for i in range(8)}, dimension=8, seed=7)
        query = make_query(("c1", "c2", "c3", "c4"), ("e", MASK))
        serial = anchor(backend_a, query, k=8, workers=1)
        threaded = anchor(backend_b, query, k=8, workers=4)
        assert serial == threaded

    def test_row_sums_and_mass_bound(self):
        backend = ReferenceBackend({f"w{i}": float(i + 1) for i in range(12)}, dimension=8, seed=8)
        query = make_query(("a", "b", "c", "d", "e"), ("ent", MASK))
        result = anchor(backend, query, k=6)
        for row in result.rows:
            assert sum(row.normalized) == pytest.approx(1.0, abs=1e-9)
        mass = combine_rows(result.proposal, result.rows)
        assert np.all(mass >= 0)
        proposal_mass = sum(p for _, p in result.proposal.candidates)
        assert float(np.sum(mass)) <= proposal_mass + 1e-9

    def test_argmax_invariant_under_probability_scaling(self):
        backend = ReferenceBackend({f"w{i}": float(i + 1) for i in range(6)}, dimension=8, seed=9)
        query = make_query(("a", "b", "c"), ("ent", MASK))
        result = anchor(backend, query, k=6)
        from clozefill.anchor import ProposalSet

        for factor in (0.5, 2.0, 1e-3, 37.0):
            scaled = ProposalSet(
                candidates=tuple((t, p * factor) for t, p in result.proposal.candidates)
            )
            mass = combine_rows(scaled, result.rows)
            assert int(np.argmax(mass)) == result.position
