"""HTTP sidecar around a pretrained masked language model.

Serves whitespace-level token interfaces so clients never deal with
subwords:

    GET  /meta    {"mask_token", "dimension", "max_subwords"}
    GET  /health  200 once the model is loaded
    POST /topk    {"tokens": [...], "mask_index": i, "k": n}
                  -> {"candidates": [{"token", "prob"}, ...]}
    POST /embed   {"tokens": [...]} -> {"vectors": [[...], ...]}

The server encodes each whitespace token to subwords, keeps the subword ->
token map, and pools per the configured strategy: either the concatenation
of every transformer layer's output per subword ("all_layers_flatten_mean",
the default) or the last layer alone ("last_layer_mean"); a token's vector
is the mean of its subwords' pooled vectors.

Errors: 400 malformed body, 422 mask token absent at mask_index, 413 subword
sequence beyond the model's limit (the advertised max_subwords).
"""
from __future__ import annotations

import argparse
import threading
from dataclasses import dataclass

import torch
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel
from transformers import AutoModelForMaskedLM, AutoTokenizer

POOLING_ALL_LAYERS = "all_layers_flatten_mean"
POOLING_LAST_LAYER = "last_layer_mean"


@dataclass
class ServerConfig:
    model_path: str
    device: str = "cpu"
    pooling: str = POOLING_ALL_LAYERS

    def __post_init__(self) -> None:
        if self.pooling not in (POOLING_ALL_LAYERS, POOLING_LAST_LAYER):
            raise ValueError(f"unknown pooling strategy {self.pooling!r}")


class TopkRequest(BaseModel):
    tokens: list[str]
    mask_index: int
    k: int


class EmbedRequest(BaseModel):
    tokens: list[str]


class ModelService:
    """Owns the model; all inference is serialized behind a lock."""

    def __init__(self, config: ServerConfig) -> None:
        self.config = config
        self.tokenizer = AutoTokenizer.from_pretrained(config.model_path)
        self.model = AutoModelForMaskedLM.from_pretrained(config.model_path)
        self.model.to(config.device)
        self.model.eval()
        self._lock = threading.Lock()

        self.mask_token = self.tokenizer.mask_token
        self.mask_id = self.tokenizer.mask_token_id
        self.max_subwords = int(self.model.config.max_position_embeddings)
        hidden = int(self.model.config.hidden_size)
        layers = int(self.model.config.num_hidden_layers)
        self.dimension = hidden * layers if config.pooling == POOLING_ALL_LAYERS else hidden

        # /topk only proposes word-initial vocabulary entries: continuation
        # pieces ("##...") and bracketed reserved tokens are masked out
        vocab_tokens = self.tokenizer.convert_ids_to_tokens(range(self.tokenizer.vocab_size))
        blocked = [
            t.startswith("##") or (t.startswith("[") and t.endswith("]")) for t in vocab_tokens
        ]
        self._blocked_ids = torch.tensor(blocked, dtype=torch.bool)
        self._vocab_tokens = vocab_tokens

    def _encode(self, tokens: list[str]) -> tuple[list[int], list[tuple[int, int]]]:
        """Subword ids with special tokens, plus each token's subword range."""
        ids = [self.tokenizer.cls_token_id]
        ranges: list[tuple[int, int]] = []
        for token in tokens:
            if token == self.mask_token:
                piece_ids = [self.mask_id]
            else:
                piece_ids = self.tokenizer.encode(token, add_special_tokens=False)
            if not piece_ids:
                raise HTTPException(status_code=400, detail=f"token {token!r} produced no subwords")
            ranges.append((len(ids), len(ids) + len(piece_ids)))
            ids.extend(piece_ids)
        ids.append(self.tokenizer.sep_token_id)
        if len(ids) > self.max_subwords:
            raise HTTPException(
                status_code=413,
                detail=f"subword sequence length {len(ids)} exceeds limit {self.max_subwords}",
            )
        return ids, ranges

    def _forward(self, ids: list[int], with_hidden: bool):
        batch = torch.tensor([ids], device=self.config.device)
        attention = torch.ones_like(batch)
        with self._lock, torch.no_grad():
            return self.model(
                input_ids=batch, attention_mask=attention, output_hidden_states=with_hidden
            )

    def meta(self) -> dict:
        return {
            "mask_token": self.mask_token,
            "dimension": self.dimension,
            "max_subwords": self.max_subwords,
        }

    def topk(self, tokens: list[str], mask_index: int, k: int) -> list[dict]:
        if not tokens or not (0 <= mask_index < len(tokens)):
            raise HTTPException(status_code=400, detail="mask_index out of range")
        if k < 1:
            raise HTTPException(status_code=400, detail="k must be >= 1")
        if tokens[mask_index] != self.mask_token:
            raise HTTPException(
                status_code=422,
                detail=f"expected {self.mask_token!r} at position {mask_index}",
            )
        ids, ranges = self._encode(tokens)
        subword_position = ranges[mask_index][0]
        output = self._forward(ids, with_hidden=False)
        logits = output.logits[0, subword_position]
        probs = torch.softmax(logits, dim=-1)
        probs = probs.masked_fill(self._blocked_ids, 0.0)
        k = min(k, int((~self._blocked_ids).sum()))
        top = torch.topk(probs, k)
        candidates = sorted(
            (
                (self._vocab_tokens[int(idx)], float(p))
                for p, idx in zip(top.values, top.indices)
            ),
            key=lambda item: (-item[1], item[0]),
        )
        return [{"token": tok, "prob": prob} for tok, prob in candidates]

    def embed(self, tokens: list[str]) -> list[list[float]]:
        if not tokens:
            raise HTTPException(status_code=400, detail="empty token list")
        ids, ranges = self._encode(tokens)
        output = self._forward(ids, with_hidden=True)
        if self.config.pooling == POOLING_ALL_LAYERS:
            # (subwords, layers * hidden): every transformer layer's output
            # flattened per subword; the embedding layer's output is excluded
            stacked = torch.cat([h[0] for h in output.hidden_states[1:]], dim=-1)
        else:
            stacked = output.hidden_states[-1][0]
        vectors = []
        for start, end in ranges:
            vectors.append(stacked[start:end].mean(dim=0).tolist())
        return vectors


def create_app(service) -> FastAPI:
    """Wire routes around a ModelService.

    `service` may also be a zero-argument callable returning the service or
    None; None means the model is still loading and every endpoint answers
    503 until it resolves.
    """
    if isinstance(service, ModelService):
        resolve = lambda: service  # noqa: E731 - trivial closure
    else:
        def resolve() -> ModelService:
            ready = service()
            if ready is None:
                raise HTTPException(status_code=503, detail="model is loading")
            return ready

    app = FastAPI(title="mlm-sidecar")

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.get("/health")
    def health():
        resolve()
        return {"status": "ok"}

    @app.get("/meta")
    def meta():
        return resolve().meta()

    @app.post("/topk")
    def topk(body: TopkRequest):
        return {"candidates": resolve().topk(body.tokens, body.mask_index, body.k)}

    @app.post("/embed")
    def embed(body: EmbedRequest):
        return {"vectors": resolve().embed(body.tokens)}

    return app


def main(argv: list[str] | None = None) -> None:
    import uvicorn

    parser = argparse.ArgumentParser(prog="mlm-sidecar")
    parser.add_argument("--model", required=True, help="checkpoint id or local directory")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8301)
    parser.add_argument("--device", default="cpu")
    parser.add_argument(
        "--pooling", choices=(POOLING_ALL_LAYERS, POOLING_LAST_LAYER), default=POOLING_ALL_LAYERS
    )
    args = parser.parse_args(argv)

    # load in the background so the port comes up immediately and readiness
    # is observable through 503 -> 200 on /health
    holder: dict[str, ModelService | None] = {"service": None}

    def load() -> None:
        holder["service"] = ModelService(
            ServerConfig(model_path=args.model, device=args.device, pooling=args.pooling)
        )

    threading.Thread(target=load, daemon=True).start()
    uvicorn.run(
        create_app(lambda: holder["service"]),
        host=args.host,
        port=args.port,
        log_level="warning",
    )


if __name__ == "__main__":
    main()
