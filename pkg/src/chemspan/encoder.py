"""A small trainable token encoder with hand-derived backpropagation.

Surface symbols are embedded through a fixed 64-bit hash into a bucket
table (so the vocabulary is open), marker and sequence-start symbols get
dedicated rows that are never hashed, learned positions are added, and a
stack of single-head self-attention + feed-forward blocks with residual
connections and layer norm produces the contextual vectors.

Everything is numpy float64. Forward passes cache exactly what backward
needs, and `grad_check` compares the analytic gradients against central
finite differences, which is the one test that keeps several hundred lines
of calculus honest.
"""

import hashlib
import math
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import NonFiniteError, OverLengthError

CLS_SYMBOL = "[CLS]"
SUBJ_OPEN = "[S:CHEM]"
SUBJ_CLOSE = "[\\S:CHEM]"
OBJ_OPEN = "[O:GENE]"
OBJ_CLOSE = "[\\O:GENE]"

SPECIAL_SYMBOLS = (CLS_SYMBOL, SUBJ_OPEN, SUBJ_CLOSE, OBJ_OPEN, OBJ_CLOSE)
_SPECIAL_INDEX = {s: i for i, s in enumerate(SPECIAL_SYMBOLS)}

_LN_EPS = 1e-5

Params = Dict[str, np.ndarray]


def surface_bucket(surface: str, buckets: int) -> int:
    """Stable 64-bit hash of the surface, reduced modulo the table size."""
    digest = hashlib.blake2b(surface.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % buckets


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _ln_forward(z, gamma, beta):
    mu = z.mean(axis=1, keepdims=True)
    centered = z - mu
    var = (centered ** 2).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = centered * inv_std
    return gamma * xhat + beta, (xhat, inv_std)


def _ln_backward(dy, xhat, inv_std, gamma):
    d = dy.shape[1]
    dgamma = (dy * xhat).sum(axis=0)
    dbeta = dy.sum(axis=0)
    dxhat = dy * gamma
    dz = (inv_std / d) * (
        d * dxhat
        - dxhat.sum(axis=1, keepdims=True)
        - xhat * (dxhat * xhat).sum(axis=1, keepdims=True)
    )
    return dz, dgamma, dbeta


class TinyEncoder:
    """Hashed embeddings + positions + attention blocks, all trainable."""

    def __init__(self, dim=64, blocks=2, ffn_dim=None, buckets=2048, max_len=512, seed=0):
        self.dim = dim
        self.blocks = blocks
        self.ffn_dim = ffn_dim if ffn_dim is not None else 2 * dim
        self.buckets = buckets
        self.max_len = max_len
        self.seed = seed
        rng = np.random.default_rng(seed)
        p: Params = {
            "tok_emb": rng.normal(0.0, 0.1, (buckets, dim)),
            "special_emb": rng.normal(0.0, 0.1, (len(SPECIAL_SYMBOLS), dim)),
            "pos_emb": rng.normal(0.0, 0.1, (max_len, dim)),
        }
        w = dim ** -0.5
        for b in range(blocks):
            for name in ("wq", "wk", "wv", "wo"):
                p[f"b{b}.{name}"] = rng.normal(0.0, w, (dim, dim))
            for name in ("bq", "bk", "bv", "bo"):
                p[f"b{b}.{name}"] = np.zeros(dim)
            p[f"b{b}.ln1_g"] = np.ones(dim)
            p[f"b{b}.ln1_b"] = np.zeros(dim)
            p[f"b{b}.w1"] = rng.normal(0.0, w, (dim, self.ffn_dim))
            p[f"b{b}.b1"] = np.zeros(self.ffn_dim)
            p[f"b{b}.w2"] = rng.normal(0.0, self.ffn_dim ** -0.5, (self.ffn_dim, dim))
            p[f"b{b}.b2"] = np.zeros(dim)
            p[f"b{b}.ln2_g"] = np.ones(dim)
            p[f"b{b}.ln2_b"] = np.zeros(dim)
        self.params = p

    def config_dict(self) -> dict:
        return {"dim": self.dim, "blocks": self.blocks, "ffn_dim": self.ffn_dim,
                "buckets": self.buckets, "max_len": self.max_len}

    # -- symbol lookup ------------------------------------------------------

    def _rows(self, symbols: Sequence[str]):
        special = np.zeros(len(symbols), dtype=bool)
        idx = np.empty(len(symbols), dtype=np.int64)
        for t, s in enumerate(symbols):
            j = _SPECIAL_INDEX.get(s)
            if j is not None:
                special[t] = True
                idx[t] = j
            else:
                idx[t] = surface_bucket(s, self.buckets)
        return special, idx

    # -- forward / backward -------------------------------------------------

    def forward(self, symbols: Sequence[str]):
        """Contextual vectors for the symbols plus the cache backward needs."""
        n = len(symbols)
        if n > self.max_len:
            raise OverLengthError(
                f"input of {n} symbols exceeds max_len={self.max_len}; "
                "shrink the context window")
        if n == 0:
            return np.zeros((0, self.dim)), {"n": 0, "block": []}
        p = self.params
        special, idx = self._rows(symbols)
        x = np.empty((n, self.dim))
        x[special] = p["special_emb"][idx[special]]
        x[~special] = p["tok_emb"][idx[~special]]
        x = x + p["pos_emb"][:n]
        cache = {"n": n, "special": special, "idx": idx, "block": []}
        scale = 1.0 / math.sqrt(self.dim)
        for b in range(self.blocks):
            q = x @ p[f"b{b}.wq"] + p[f"b{b}.bq"]
            k = x @ p[f"b{b}.wk"] + p[f"b{b}.bk"]
            v = x @ p[f"b{b}.wv"] + p[f"b{b}.bv"]
            att = _softmax_rows((q @ k.T) * scale)
            ctx = att @ v
            out = ctx @ p[f"b{b}.wo"] + p[f"b{b}.bo"]
            r1 = x + out
            h, ln1_cache = _ln_forward(r1, p[f"b{b}.ln1_g"], p[f"b{b}.ln1_b"])
            u = h @ p[f"b{b}.w1"] + p[f"b{b}.b1"]
            z = np.maximum(u, 0.0)
            f = z @ p[f"b{b}.w2"] + p[f"b{b}.b2"]
            r2 = h + f
            y, ln2_cache = _ln_forward(r2, p[f"b{b}.ln2_g"], p[f"b{b}.ln2_b"])
            cache["block"].append((x, q, k, v, att, ctx, ln1_cache, h, u, z, ln2_cache))
            x = y
        return x, cache

    def encode(self, symbols: Sequence[str]) -> np.ndarray:
        """Forward pass only; deterministic for fixed input and parameters."""
        return self.forward(symbols)[0]

    def zero_grads(self) -> Params:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def backward(self, cache, d_out: np.ndarray, grads: Params) -> None:
        """Accumulate parameter gradients for one sequence into ``grads``."""
        p = self.params
        n = cache["n"]
        if n == 0:
            return
        scale = 1.0 / math.sqrt(self.dim)
        dx = d_out
        for b in reversed(range(self.blocks)):
            x, q, k, v, att, ctx, ln1_cache, h, u, z, ln2_cache = cache["block"][b]
            dr2, dg2, db2 = _ln_backward(dx, *ln2_cache, p[f"b{b}.ln2_g"])
            grads[f"b{b}.ln2_g"] += dg2
            grads[f"b{b}.ln2_b"] += db2
            df = dr2
            dh = dr2.copy()
            grads[f"b{b}.w2"] += z.T @ df
            grads[f"b{b}.b2"] += df.sum(axis=0)
            dz = df @ p[f"b{b}.w2"].T
            du = dz * (u > 0.0)
            grads[f"b{b}.w1"] += h.T @ du
            grads[f"b{b}.b1"] += du.sum(axis=0)
            dh += du @ p[f"b{b}.w1"].T
            dr1, dg1, db1 = _ln_backward(dh, *ln1_cache, p[f"b{b}.ln1_g"])
            grads[f"b{b}.ln1_g"] += dg1
            grads[f"b{b}.ln1_b"] += db1
            dout = dr1
            dx = dr1.copy()
            grads[f"b{b}.wo"] += ctx.T @ dout
            grads[f"b{b}.bo"] += dout.sum(axis=0)
            dctx = dout @ p[f"b{b}.wo"].T
            datt = dctx @ v.T
            dv = att.T @ dctx
            dscores = att * (datt - (datt * att).sum(axis=1, keepdims=True))
            dq = (dscores @ k) * scale
            dk = (dscores.T @ q) * scale
            grads[f"b{b}.wq"] += x.T @ dq
            grads[f"b{b}.bq"] += dq.sum(axis=0)
            grads[f"b{b}.wk"] += x.T @ dk
            grads[f"b{b}.bk"] += dk.sum(axis=0)
            grads[f"b{b}.wv"] += x.T @ dv
            grads[f"b{b}.bv"] += dv.sum(axis=0)
            dx += dq @ p[f"b{b}.wq"].T + dk @ p[f"b{b}.wk"].T + dv @ p[f"b{b}.wv"].T
        special, idx = cache["special"], cache["idx"]
        if n:
            grads["pos_emb"][:n] += dx
            hashed = ~special
            np.add.at(grads["tok_emb"], idx[hashed], dx[hashed])
            np.add.at(grads["special_emb"], idx[special], dx[special])


class Adam:
    """Plain Adam over a name -> array parameter dict."""

    def __init__(self, params: Params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: Params) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for key, p in self.params.items():
            g = grads[key]
            m = self.m[key]
            v = self.v[key]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


# ---------------------------------------------------------------------------
# gradient checking

def grad_check(loss_fn, grad_fn, params: Params, epsilon: float,
               keys: Sequence[str] = None) -> float:
    """Max relative disagreement between analytic and finite-difference grads.

    ``loss_fn()`` returns the scalar loss for the current parameters;
    ``grad_fn()`` returns the analytic gradient dict. Every entry of every
    parameter (or just ``keys``) is perturbed by ±epsilon in place. The
    relative error uses a 1e-3 floor on the denominator so that
    finite-difference noise on near-zero gradients is not misread as a
    calculus bug, while any real error orders of magnitude above the noise
    floor still shows up.
    """
    if not 0.0 < epsilon <= 1e-2:
        raise ValueError(f"epsilon must be in (0, 1e-2], got {epsilon!r}")
    base = float(loss_fn())
    if not math.isfinite(base):
        raise NonFiniteError(f"loss is {base!r} before perturbation")
    analytic = grad_fn()
    worst = 0.0
    for key in sorted(keys if keys is not None else params):
        flat = params[key].reshape(-1)
        aflat = analytic[key].reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + epsilon
            hi = float(loss_fn())
            flat[i] = original - epsilon
            lo = float(loss_fn())
            flat[i] = original
            if not (math.isfinite(hi) and math.isfinite(lo)):
                raise NonFiniteError(f"non-finite loss while perturbing {key}[{i}]")
            fd = (hi - lo) / (2.0 * epsilon)
            diff = abs(aflat[i] - fd)
            if diff == 0.0:
                continue
            err = diff / max(abs(aflat[i]), abs(fd), 1e-3)
            if err > worst:
                worst = err
    return worst


def encoder_grad_check(encoder: TinyEncoder, symbols: Sequence[str],
                       epsilon: float, seed: int = 0) -> float:
    """Check all encoder parameters through a random linear probe loss."""
    rng = np.random.default_rng(seed)
    n = len(symbols)
    probe = rng.normal(0.0, 1.0, (n, encoder.dim))

    def loss_fn():
        return float((encoder.encode(symbols) * probe).sum())

    def grad_fn():
        h, cache = encoder.forward(symbols)
        grads = encoder.zero_grads()
        encoder.backward(cache, probe, grads)
        return grads

    return grad_check(loss_fn, grad_fn, encoder.params, epsilon)


def flat_norm(grads: Params) -> float:
    total = 0.0
    for g in grads.values():
        total += float((g * g).sum())
    return math.sqrt(total)
