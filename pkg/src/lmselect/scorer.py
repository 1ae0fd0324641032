"""Compatibility scorer: bilinear two-branch network with analytic gradients.

The scorer assigns a real number to a (model representation, language
representation) pair.  Each representation passes through its own two-layer
feed-forward branch (ReLU hidden layer, linear output); the branch outputs
are combined through a bilinear form.  Two structural variants exist:

* bilinear (default): ``s = ffnn_m(g_m)^T W_bi ffnn_l(g_l)``
* no-language head:   ``s = v^T ffnn_m(g_m) + c`` when no language
  embedding is available.

Optional input variants compose with either structure: a learned fusion of
three feature vectors on the model side, and a task embedding concatenated
to the language vector on the language side.

Forward and gradient evaluation are pure functions of (inputs, params).
Gradients are exact up to the ReLU subgradient choice at zero (0 is used)
and are verified against central finite differences in the test suite.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .data import format_float
from .errors import ContractError, DataError, ParseError

DEFAULT_HIDDEN_DIM = 1024
DEFAULT_BRANCH_DIM = 128
DEFAULT_TASK_DIM = 16

PARAMS_FORMAT_VERSION = "lmsparams v1"


def sigmoid(x):
    """Numerically stable logistic function, exact at the extremes."""
    x = np.asarray(x, dtype=np.float64)
    # sigma(x) = exp(-softplus(-x)); logaddexp avoids overflow on both tails
    return np.exp(-np.logaddexp(0.0, -x))


def softplus(x):
    """log(1 + e^x) without overflow; this is -log sigma(-x)."""
    x = np.asarray(x, dtype=np.float64)
    return np.logaddexp(0.0, x)


# ---------------------------------------------------------------------------
# Parameter container


@dataclass
class FfnnParams:
    """One two-layer branch: hidden ReLU layer, linear output layer."""

    w1: np.ndarray  # (hidden, d_in)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (out, hidden)
    b2: np.ndarray  # (out,)

    def copy(self) -> "FfnnParams":
        return FfnnParams(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())


@dataclass
class ScorerParams:
    """All trainable tensors; absent components encode the variant in use.

    ``lang_branch`` and ``w_bi`` are present together (bilinear variant);
    ``head_v``/``head_c`` replace them when no language embedding is used.
    ``fusion_w`` is present only for the fusion feature strategy and
    ``task_emb`` only in task mode.
    """

    model_branch: FfnnParams
    lang_branch: FfnnParams | None = None
    w_bi: np.ndarray | None = None
    head_v: np.ndarray | None = None
    head_c: np.ndarray | None = None  # 0-d array
    fusion_w: np.ndarray | None = None  # (3,)
    task_emb: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.validate_shapes()

    @property
    def uses_lang(self) -> bool:
        return self.lang_branch is not None

    @property
    def uses_fusion(self) -> bool:
        return self.fusion_w is not None

    @property
    def d_model(self) -> int:
        return self.model_branch.w1.shape[1]

    @property
    def branch_dim(self) -> int:
        return self.model_branch.w2.shape[0]

    @property
    def task_dim(self) -> int:
        if not self.task_emb:
            return 0
        return next(iter(self.task_emb.values())).shape[0]

    @property
    def d_lang(self) -> int:
        """Raw language-vector dimension expected on inputs."""
        if self.lang_branch is None:
            return 0
        return self.lang_branch.w1.shape[1] - self.task_dim

    def validate_shapes(self) -> None:
        mb = self.model_branch
        h, d = mb.w1.shape
        k = mb.w2.shape[0]
        if mb.b1.shape != (h,) or mb.w2.shape != (k, h) or mb.b2.shape != (k,):
            raise ContractError("model branch tensor shapes are inconsistent")
        if (self.lang_branch is None) != (self.w_bi is None):
            raise ContractError("lang_branch and w_bi must be present together")
        if self.lang_branch is not None:
            lb = self.lang_branch
            hl, _ = lb.w1.shape
            kl = lb.w2.shape[0]
            if lb.b1.shape != (hl,) or lb.w2.shape != (kl, hl) or lb.b2.shape != (kl,):
                raise ContractError("lang branch tensor shapes are inconsistent")
            if self.w_bi.shape != (k, kl):
                raise ContractError(
                    f"w_bi shape {self.w_bi.shape} does not match branch outputs ({k}, {kl})"
                )
            if self.head_v is not None or self.head_c is not None:
                raise ContractError("head is only valid without a language branch")
        else:
            if self.head_v is None or self.head_c is None:
                raise ContractError("head_v and head_c are required without a language branch")
            if self.head_v.shape != (k,):
                raise ContractError(f"head_v shape {self.head_v.shape} does not match branch output {k}")
        if self.fusion_w is not None and self.fusion_w.shape != (3,):
            raise ContractError("fusion_w must have exactly 3 weights")
        dims = {v.shape for v in self.task_emb.values()}
        if len(dims) > 1:
            raise ContractError("task embeddings must share one dimension")
        if self.task_emb and self.lang_branch is None:
            raise ContractError("task embeddings require a language branch")

    def tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        """All trainable tensors in a fixed canonical order."""
        mb = self.model_branch
        yield "model.w1", mb.w1
        yield "model.b1", mb.b1
        yield "model.w2", mb.w2
        yield "model.b2", mb.b2
        if self.lang_branch is not None:
            lb = self.lang_branch
            yield "lang.w1", lb.w1
            yield "lang.b1", lb.b1
            yield "lang.w2", lb.w2
            yield "lang.b2", lb.b2
            yield "w_bi", self.w_bi
        if self.head_v is not None:
            yield "head.v", self.head_v
            yield "head.c", self.head_c
        if self.fusion_w is not None:
            yield "fusion_w", self.fusion_w
        for task_id in sorted(self.task_emb):
            yield f"task.{task_id}", self.task_emb[task_id]

    def copy(self) -> "ScorerParams":
        return ScorerParams(
            model_branch=self.model_branch.copy(),
            lang_branch=self.lang_branch.copy() if self.lang_branch else None,
            w_bi=None if self.w_bi is None else self.w_bi.copy(),
            head_v=None if self.head_v is None else self.head_v.copy(),
            head_c=None if self.head_c is None else self.head_c.copy(),
            fusion_w=None if self.fusion_w is None else self.fusion_w.copy(),
            task_emb={t: v.copy() for t, v in self.task_emb.items()},
        )


def params_equal(a: ScorerParams, b: ScorerParams) -> bool:
    ta, tb = dict(a.tensors()), dict(b.tensors())
    if ta.keys() != tb.keys():
        return False
    return all(np.array_equal(ta[name], tb[name]) for name in ta)


def zero_grads(params: ScorerParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in params.tensors()}


# ---------------------------------------------------------------------------
# Initialization


@dataclass(frozen=True)
class ScorerDims:
    d_model: int
    d_lang: int = 0
    hidden: int = DEFAULT_HIDDEN_DIM
    branch: int = DEFAULT_BRANCH_DIM
    task: int = DEFAULT_TASK_DIM


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    # Glorot uniform: bound = sqrt(6 / (fan_in + fan_out))
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


def init_params(
    dims: ScorerDims,
    *,
    use_lang: bool = True,
    use_fusion: bool = False,
    task_ids: Sequence[str] = (),
    seed: int | np.random.SeedSequence = 0,
) -> ScorerParams:
    """Fresh parameters, fully determined by the seed.

    Weight matrices are Glorot-uniform, biases zero, fusion weights 1/3
    each, task embeddings uniform in [-0.1, 0.1].  Tensors are drawn from a
    single PCG64 generator in declaration order (model branch, language
    branch, bilinear map, head, task embeddings with ids sorted), so the
    same seed and configuration always yield bit-identical parameters.
    """
    if task_ids and not use_lang:
        raise ContractError("task embeddings require a language branch")
    rng = np.random.default_rng(seed)
    h, k = dims.hidden, dims.branch
    model_branch = FfnnParams(
        w1=_glorot(rng, h, dims.d_model),
        b1=np.zeros(h),
        w2=_glorot(rng, k, h),
        b2=np.zeros(k),
    )
    lang_branch = None
    w_bi = None
    head_v = None
    head_c = None
    if use_lang:
        d_lang_in = dims.d_lang + (dims.task if task_ids else 0)
        if d_lang_in <= 0:
            raise ContractError("language branch requires a positive input dimension")
        lang_branch = FfnnParams(
            w1=_glorot(rng, h, d_lang_in),
            b1=np.zeros(h),
            w2=_glorot(rng, k, h),
            b2=np.zeros(k),
        )
        w_bi = _glorot(rng, k, k)
    else:
        head_v = _glorot(rng, 1, k)[0]
        head_c = np.zeros(())
    fusion_w = np.full(3, 1.0 / 3.0) if use_fusion else None
    task_emb = {}
    for task_id in sorted(task_ids):
        task_emb[task_id] = rng.uniform(-0.1, 0.1, size=dims.task)
    return ScorerParams(
        model_branch=model_branch,
        lang_branch=lang_branch,
        w_bi=w_bi,
        head_v=head_v,
        head_c=head_c,
        fusion_w=fusion_w,
        task_emb=task_emb,
    )


# ---------------------------------------------------------------------------
# Forward


def ffnn_forward(x, branch: FfnnParams) -> np.ndarray:
    """Two-layer forward pass; accepts a single vector or a stack of rows."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != branch.w1.shape[1]:
        raise ContractError(
            f"input dimension {x.shape[-1]} does not match branch input {branch.w1.shape[1]}"
        )
    hidden = np.maximum(x @ branch.w1.T + branch.b1, 0.0)
    return hidden @ branch.w2.T + branch.b2


def fuse(features: Sequence[np.ndarray], fusion_w: np.ndarray) -> np.ndarray:
    """Weighted combination of the three feature slots (english, context, target)."""
    if len(features) != len(fusion_w):
        raise ContractError(f"expected {len(fusion_w)} feature vectors, found {len(features)}")
    stacked = np.stack([np.asarray(f, dtype=np.float64) for f in features])
    return fusion_w @ stacked


@dataclass(eq=False)
class ScorerInput:
    """One scoring query: model features, language vector, optional task.

    ``model_features`` is a single vector, or a (english, context, target)
    triple when the fusion strategy is active.  ``lang_vec`` is None for the
    no-language head variant.
    """

    model_features: np.ndarray | tuple[np.ndarray, ...]
    lang_vec: np.ndarray | None = None
    task_id: str | None = None

    def feature_parts(self) -> tuple[np.ndarray, ...]:
        if isinstance(self.model_features, (tuple, list)):
            return tuple(np.asarray(f, dtype=np.float64) for f in self.model_features)
        return (np.asarray(self.model_features, dtype=np.float64),)


def _check_input(params: ScorerParams, inp: ScorerInput) -> None:
    parts = inp.feature_parts()
    if params.uses_fusion and len(parts) != 3:
        raise ContractError(f"fusion scorer expects 3 feature vectors, found {len(parts)}")
    if not params.uses_fusion and len(parts) != 1:
        raise ContractError(f"scorer expects a single feature vector, found {len(parts)}")
    for part in parts:
        if part.shape != (params.d_model,):
            raise ContractError(
                f"feature vector has shape {part.shape}, expected ({params.d_model},)"
            )
    if params.uses_lang:
        if inp.lang_vec is None:
            raise ContractError("scorer has a language branch but no lang_vec was given")
        if np.asarray(inp.lang_vec).shape != (params.d_lang,):
            raise ContractError(
                f"lang_vec has dimension {np.asarray(inp.lang_vec).shape}, expected ({params.d_lang},)"
            )
    elif inp.lang_vec is not None:
        raise ContractError("scorer has no language branch but a lang_vec was given")
    if params.task_emb:
        if inp.task_id is None:
            raise ContractError("scorer uses task embeddings but no task_id was given")
        if inp.task_id not in params.task_emb:
            raise ContractError(f"unknown task_id {inp.task_id!r}")
    elif inp.task_id is not None:
        raise ContractError("scorer has no task embeddings but a task_id was given")


def _lang_branch_input(params: ScorerParams, inp: ScorerInput) -> np.ndarray:
    vec = np.asarray(inp.lang_vec, dtype=np.float64)
    if params.task_emb:
        return np.concatenate([vec, params.task_emb[inp.task_id]])
    return vec


def score(inp: ScorerInput, params: ScorerParams) -> float:
    """Compatibility score for one (model, language) query."""
    _check_input(params, inp)
    parts = inp.feature_parts()
    x = fuse(parts, params.fusion_w) if params.uses_fusion else parts[0]
    p = ffnn_forward(x, params.model_branch)
    if not params.uses_lang:
        return float(p @ params.head_v + params.head_c)
    q = ffnn_forward(_lang_branch_input(params, inp), params.lang_branch)
    return float(p @ params.w_bi @ q)


def score_candidates(
    params: ScorerParams,
    model_inputs: Sequence[ScorerInput],
) -> np.ndarray:
    """Vectorized scores for a batch of queries (used by selection and tuning)."""
    if not model_inputs:
        return np.zeros(0)
    for inp in model_inputs:
        _check_input(params, inp)
    if params.uses_fusion:
        stacks = [np.stack([inp.feature_parts()[i] for inp in model_inputs]) for i in range(3)]
        x = sum(w * s for w, s in zip(params.fusion_w, stacks))
    else:
        x = np.stack([inp.feature_parts()[0] for inp in model_inputs])
    p = ffnn_forward(x, params.model_branch)
    if not params.uses_lang:
        return p @ params.head_v + float(params.head_c)
    z = np.stack([_lang_branch_input(params, inp) for inp in model_inputs])
    q = ffnn_forward(z, params.lang_branch)
    return np.einsum("ij,ij->i", p @ params.w_bi, q)


# ---------------------------------------------------------------------------
# Batched loss gradient

Pair = tuple[ScorerInput, ScorerInput]  # (winner, loser)


class _SideIndex:
    """Deduplicates identical side inputs so each is forwarded once."""

    def __init__(self):
        self.index: dict = {}
        self.items: list = []

    def add(self, key, item) -> int:
        if key not in self.index:
            self.index[key] = len(self.items)
            self.items.append(item)
        return self.index[key]


def _ffnn_batch_backward(branch: FfnnParams, x, z1, hidden, d_out):
    """Backprop one branch; returns per-tensor grads and the input gradient."""
    d_w2 = d_out.T @ hidden
    d_b2 = d_out.sum(axis=0)
    d_hidden = d_out @ branch.w2
    d_z1 = d_hidden * (z1 > 0)  # ReLU subgradient: 0 at the kink
    d_w1 = d_z1.T @ x
    d_b1 = d_z1.sum(axis=0)
    d_x = d_z1 @ branch.w1
    return d_w1, d_b1, d_w2, d_b2, d_x


def pair_losses(params: ScorerParams, pairs: Sequence[Pair]) -> np.ndarray:
    """Per-pair ranking losses -log sigma(s_winner - s_loser), forward only."""
    if not pairs:
        return np.zeros(0)
    flat: list[ScorerInput] = []
    for winner, loser in pairs:
        flat.append(winner)
        flat.append(loser)
    scores = score_candidates(params, flat)
    deltas = scores[0::2] - scores[1::2]
    return softplus(-deltas)


def grad(
    params: ScorerParams,
    pairs: Sequence[Pair],
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean ranking loss over a batch of (winner, loser) pairs and its gradient.

    The per-pair loss is -log sigma(s_winner - s_loser); the batch loss is
    the mean.  Returns a gradient dict whose keys and shapes mirror
    ``params.tensors()``.  Identical side inputs share one forward pass and
    accumulation is a fixed-order reduction, so results are deterministic.
    """
    if not pairs:
        raise ContractError("gradient of an empty batch is undefined")
    for winner, loser in pairs:
        _check_input(params, winner)
        _check_input(params, loser)
    batch = len(pairs)

    models = _SideIndex()
    langs = _SideIndex()
    m_idx = np.empty(2 * batch, dtype=np.intp)
    l_idx = np.empty(2 * batch, dtype=np.intp) if params.uses_lang else None
    for s, inp in enumerate(inp for pair in pairs for inp in pair):
        parts = inp.feature_parts()
        m_idx[s] = models.add(tuple(p.tobytes() for p in parts), parts)
        if params.uses_lang:
            vec = np.asarray(inp.lang_vec, dtype=np.float64)
            l_idx[s] = langs.add((vec.tobytes(), inp.task_id), (vec, inp.task_id))

    grads = zero_grads(params)

    # Model branch forward over unique feature rows.
    if params.uses_fusion:
        slot_stacks = [np.stack([item[i] for item in models.items]) for i in range(3)]
        x_m = sum(w * s for w, s in zip(params.fusion_w, slot_stacks))
    else:
        x_m = np.stack([item[0] for item in models.items])
    mb = params.model_branch
    z1_m = x_m @ mb.w1.T + mb.b1
    h_m = np.maximum(z1_m, 0.0)
    p = h_m @ mb.w2.T + mb.b2  # (n_models, k)

    if params.uses_lang:
        lb = params.lang_branch
        z_rows = []
        for vec, task_id in langs.items:
            z_rows.append(np.concatenate([vec, params.task_emb[task_id]]) if params.task_emb else vec)
        x_l = np.stack(z_rows)
        z1_l = x_l @ lb.w1.T + lb.b1
        h_l = np.maximum(z1_l, 0.0)
        q = h_l @ lb.w2.T + lb.b2  # (n_langs, k)
        side_scores = np.einsum("ij,ij->i", (p @ params.w_bi)[m_idx], q[l_idx])
    else:
        side_scores = (p @ params.head_v + float(params.head_c))[m_idx]

    deltas = side_scores[0::2] - side_scores[1::2]
    loss = float(softplus(-deltas).mean())

    # d loss / d delta = -sigma(-delta), averaged over the batch.
    d_delta = -sigmoid(-deltas) / batch
    side_coef = np.empty(2 * batch)
    side_coef[0::2] = d_delta
    side_coef[1::2] = -d_delta

    if params.uses_lang:
        g = np.zeros((len(models.items), len(langs.items)))
        np.add.at(g, (m_idx, l_idx), side_coef)
        grads["w_bi"] += p.T @ g @ q
        d_p = g @ q @ params.w_bi.T
        d_q = (g.T @ p) @ params.w_bi
        d_w1, d_b1, d_w2, d_b2, d_xl = _ffnn_batch_backward(lb, x_l, z1_l, h_l, d_q)
        grads["lang.w1"] += d_w1
        grads["lang.b1"] += d_b1
        grads["lang.w2"] += d_w2
        grads["lang.b2"] += d_b2
        if params.task_emb:
            d_task = d_xl[:, params.d_lang:]
            for row, (_, task_id) in enumerate(langs.items):
                grads[f"task.{task_id}"] += d_task[row]
    else:
        g_m = np.zeros(len(models.items))
        np.add.at(g_m, m_idx, side_coef)
        grads["head.v"] += p.T @ g_m
        grads["head.c"] += g_m.sum()
        d_p = np.outer(g_m, params.head_v)

    d_w1, d_b1, d_w2, d_b2, d_xm = _ffnn_batch_backward(mb, x_m, z1_m, h_m, d_p)
    grads["model.w1"] += d_w1
    grads["model.b1"] += d_b1
    grads["model.w2"] += d_w2
    grads["model.b2"] += d_b2
    if params.uses_fusion:
        for i in range(3):
            grads["fusion_w"][i] += float(np.sum(slot_stacks[i] * d_xm))

    return loss, grads


# ---------------------------------------------------------------------------
# Serialization


def save_params(params: ScorerParams, path: str | Path) -> None:
    """Versioned text format: one line per tensor, row-major, 17 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(PARAMS_FORMAT_VERSION + "\n")
        for name, arr in params.tensors():
            shape = "scalar" if arr.ndim == 0 else ",".join(str(d) for d in arr.shape)
            values = " ".join(format_float(v) for v in np.ravel(arr))
            fh.write(f"{name}\t{shape}\t{values}\n")


_CORE_TENSORS = ("model.w1", "model.b1", "model.w2", "model.b2")
_LANG_TENSORS = ("lang.w1", "lang.b1", "lang.w2", "lang.b2", "w_bi")
_HEAD_TENSORS = ("head.v", "head.c")


def load_params(path: str | Path) -> ScorerParams:
    """Re-hydrate parameters saved by save_params; bit-exact round-trip."""
    p = Path(path)
    if not p.is_file():
        raise DataError(f"missing params file: {p}")
    with open(p, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\r\n")
        if header != PARAMS_FORMAT_VERSION:
            raise DataError(
                f"{path}: unsupported params format {header!r}, expected {PARAMS_FORMAT_VERSION!r}"
            )
        tensors: dict[str, np.ndarray] = {}
        for lineno, raw in enumerate(fh, start=2):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError(str(path), lineno, f"expected 3 fields, found {len(fields)}")
            name, shape_text, vec_text = fields
            if name in tensors:
                raise ParseError(str(path), lineno, f"duplicate tensor {name!r}")
            if shape_text == "scalar":
                shape: tuple[int, ...] = ()
            else:
                try:
                    shape = tuple(int(t) for t in shape_text.split(","))
                except ValueError:
                    raise ParseError(str(path), lineno, f"bad shape {shape_text!r}") from None
            tokens = vec_text.split()
            expected = int(np.prod(shape)) if shape else 1
            if len(tokens) != expected:
                raise ParseError(
                    str(path), lineno,
                    f"tensor {name!r} declares shape {shape_text} ({expected} values), found {len(tokens)}",
                )
            values = np.array([_parse_params_float(t, str(path), lineno, name) for t in tokens])
            tensors[name] = values.reshape(shape)

    for name in _CORE_TENSORS:
        if name not in tensors:
            raise DataError(f"{path}: missing tensor {name!r}")
    has_lang = any(name in tensors for name in _LANG_TENSORS)
    has_head = any(name in tensors for name in _HEAD_TENSORS)
    if has_lang and has_head:
        raise DataError(f"{path}: file mixes language-branch and head tensors")
    wanted = _LANG_TENSORS if has_lang else _HEAD_TENSORS
    for name in wanted:
        if name not in tensors:
            raise DataError(f"{path}: missing tensor {name!r}")

    model_branch = FfnnParams(
        w1=tensors.pop("model.w1"), b1=tensors.pop("model.b1"),
        w2=tensors.pop("model.w2"), b2=tensors.pop("model.b2"),
    )
    lang_branch = None
    w_bi = None
    head_v = None
    head_c = None
    if has_lang:
        lang_branch = FfnnParams(
            w1=tensors.pop("lang.w1"), b1=tensors.pop("lang.b1"),
            w2=tensors.pop("lang.w2"), b2=tensors.pop("lang.b2"),
        )
        w_bi = tensors.pop("w_bi")
    else:
        head_v = tensors.pop("head.v")
        head_c = tensors.pop("head.c")
    fusion_w = tensors.pop("fusion_w", None)
    task_emb = {}
    for name in sorted(tensors):
        if not name.startswith("task."):
            raise DataError(f"{path}: unknown tensor {name!r}")
        task_emb[name[len("task."):]] = tensors[name]
    try:
        return ScorerParams(
            model_branch=model_branch,
            lang_branch=lang_branch,
            w_bi=w_bi,
            head_v=head_v,
            head_c=head_c,
            fusion_w=fusion_w,
            task_emb=task_emb,
        )
    except ContractError as exc:
        raise DataError(f"{path}: {exc}") from None


def _parse_params_float(token: str, path: str, lineno: int, name: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(path, lineno, f"tensor {name!r}: {token!r} is not a number") from None
    if not np.isfinite(value):
        raise ParseError(path, lineno, f"tensor {name!r}: non-finite value {token!r}")
    return value


# ---------------------------------------------------------------------------
# Finite-difference verification


def flatten_params(params: ScorerParams) -> np.ndarray:
    return np.concatenate([np.ravel(arr) for _, arr in params.tensors()])


def assign_flat(params: ScorerParams, theta: np.ndarray) -> None:
    """Write a flat vector back into the parameter tensors, in place."""
    offset = 0
    for _, arr in params.tensors():
        size = arr.size
        arr[...] = theta[offset:offset + size].reshape(arr.shape)
        offset += size
    if offset != theta.size:
        raise ContractError(f"flat vector has {theta.size} entries, parameters hold {offset}")


def gradient_check(
    params: ScorerParams,
    pairs: Sequence[Pair],
    step: float = 1e-6,
    zero_tol: float = 1e-8,
) -> tuple[float, float]:
    """Compare the analytic gradient against central finite differences.

    Returns (max_abs_diff, max_rel_err).  Components whose absolute
    disagreement is below ``zero_tol`` count as relative error 0, which is
    the convention for gradients that vanish at the evaluation point.
    """
    _, analytic = grad(params, pairs)
    flat_analytic = np.concatenate([np.ravel(analytic[name]) for name, _ in params.tensors()])

    work = params.copy()
    theta = flatten_params(work)
    fd = np.empty_like(theta)
    for i in range(theta.size):
        original = theta[i]
        theta[i] = original + step
        assign_flat(work, theta)
        up, _ = grad(work, pairs)
        theta[i] = original - step
        assign_flat(work, theta)
        down, _ = grad(work, pairs)
        theta[i] = original
        fd[i] = (up - down) / (2.0 * step)
    assign_flat(work, theta)

    abs_diff = np.abs(flat_analytic - fd)
    scale = np.maximum(np.abs(flat_analytic), np.abs(fd))
    rel = np.where(abs_diff <= zero_tol, 0.0, abs_diff / np.maximum(scale, 1e-300))
    return float(abs_diff.max(initial=0.0)), float(rel.max(initial=0.0))


_AUDIT_VARIANTS = (
    ("bilinear", dict(use_lang=True, use_fusion=False, tasks=False)),
    ("none", dict(use_lang=False, use_fusion=False, tasks=False)),
    ("fusion", dict(use_lang=True, use_fusion=True, tasks=False)),
    ("task", dict(use_lang=True, use_fusion=False, tasks=True)),
    ("fusion+task", dict(use_lang=True, use_fusion=True, tasks=True)),
    ("none+fusion", dict(use_lang=False, use_fusion=True, tasks=False)),
)


@dataclass
class GradientAuditReport:
    n_configs: int
    max_rel_err: float
    max_abs_diff: float
    worst_variant: str
    elapsed_seconds: float


def random_gradient_audit(
    n_configs: int = 100,
    seed: int = 0,
    step: float = 1e-6,
) -> GradientAuditReport:
    """Finite-difference audit over random small configurations of every variant.

    Inputs are redrawn when a hidden pre-activation falls within the
    finite-difference step of the ReLU kink, where the subgradient and the
    difference quotient legitimately disagree.
    """
    max_rel = 0.0
    max_abs = 0.0
    worst = ""
    start = time.monotonic()
    for i in range(n_configs):
        variant, flags = _AUDIT_VARIANTS[i % len(_AUDIT_VARIANTS)]
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        d_model = int(rng.integers(1, 9))
        d_lang = int(rng.integers(1, 7))
        hidden = int(rng.integers(1, 9))
        branch = int(rng.integers(1, 5))
        task = int(rng.integers(1, 4))
        n_pairs = int(rng.integers(1, 6))
        dims = ScorerDims(d_model=d_model, d_lang=d_lang, hidden=hidden, branch=branch, task=task)
        task_ids = ("t0", "t1") if flags["tasks"] else ()
        params = init_params(
            dims,
            use_lang=flags["use_lang"],
            use_fusion=flags["use_fusion"],
            task_ids=task_ids,
            seed=rng.integers(0, 2**32),
        )
        # Glorot leaves biases at zero; perturb everything so no tensor sits
        # at a special point.
        theta = flatten_params(params)
        assign_flat(params, theta + rng.normal(scale=0.3, size=theta.size))
        pairs = _draw_pairs(rng, params, dims, flags, n_pairs, step)
        abs_diff, rel = gradient_check(params, pairs, step=step)
        if rel > max_rel or (max_rel == 0.0 and abs_diff > max_abs):
            worst = variant
        max_rel = max(max_rel, rel)
        max_abs = max(max_abs, abs_diff)
    return GradientAuditReport(
        n_configs=n_configs,
        max_rel_err=max_rel,
        max_abs_diff=max_abs,
        worst_variant=worst,
        elapsed_seconds=time.monotonic() - start,
    )


def _draw_pairs(rng, params, dims, flags, n_pairs, step):
    for _ in range(50):
        pairs = []
        for _ in range(n_pairs):
            sides = []
            lang_vec = rng.normal(size=dims.d_lang) if flags["use_lang"] else None
            task_id = (rng.choice(["t0", "t1"]) if flags["tasks"] else None)
            for _ in range(2):
                if flags["use_fusion"]:
                    feats = tuple(rng.normal(size=dims.d_model) for _ in range(3))
                else:
                    feats = rng.normal(size=dims.d_model)
                sides.append(ScorerInput(feats, lang_vec, task_id))
            pairs.append((sides[0], sides[1]))
        if _min_preactivation(params, pairs) > 10.0 * step:
            return pairs
    return pairs  # overwhelmingly unlikely; accept the last draw


def _min_preactivation(params: ScorerParams, pairs) -> float:
    smallest = np.inf
    for winner, loser in pairs:
        for inp in (winner, loser):
            parts = inp.feature_parts()
            x = fuse(parts, params.fusion_w) if params.uses_fusion else parts[0]
            z1 = x @ params.model_branch.w1.T + params.model_branch.b1
            smallest = min(smallest, float(np.abs(z1).min()))
            if params.uses_lang:
                z = _lang_branch_input(params, inp)
                z1l = z @ params.lang_branch.w1.T + params.lang_branch.b1
                smallest = min(smallest, float(np.abs(z1l).min()))
    return smallest
