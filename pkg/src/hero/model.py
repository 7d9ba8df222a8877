"""Recursive document encoder over linguistic trees.

Every internal node is embedded by running a forward and a backward GRU over
its children's vectors, concatenating the two hidden states per position and
mean-pooling across positions. Repeating this bottom-up yields the document
vector at the root, which a two-logit softmax head classifies.

Three sharing modes decide which nodes reuse which GRU parameters (a single
shared pair, one pair per linguistic level, or one pair per parent label),
and three ablations replace parts of the tree walk with plain averaging.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from . import nn
from .embed import EmbeddingTable, embed_leaves
from .ling_tree import Level, LingTree, NodeKind, TreeNode, edu_nodes, iter_nodes, post_order


class SharingMode(enum.Enum):
    UNIFIED = "unified"
    LEVEL_SPECIFIC = "level_specific"
    ATTRIBUTE_SPECIFIC = "attribute_specific"


class AblationMode(enum.Enum):
    FULL = "full"
    NO_DISCOURSE = "no_discourse"    # document = mean of EDU encodings
    NO_SYNTAX = "no_syntax"          # EDU = mean of its word embeddings
    NO_STRUCTURE = "no_structure"    # document = mean of all word embeddings


UNIFIED_KEY = "shared"
SYNTAX_KEY = "SYNTAX"
DISCOURSE_KEY = "DISCOURSE"
UNK_SYNTAX = "UNK_SYNTAX"
UNK_RR = "UNK_RR"

CHECKPOINT_VERSION = 1


class DimMismatchError(ValueError):
    pass


class MissingTraceError(ValueError):
    pass


class VersionMismatchError(ValueError):
    pass


class CorruptCheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class AttributeVocab:
    """Parent labels observed in training data, kept in first-seen order."""

    syntax_labels: tuple[str, ...] = ()
    rr_labels: tuple[str, ...] = ()

    @classmethod
    def from_trees(cls, trees) -> "AttributeVocab":
        syntax: dict[str, None] = {}
        rr: dict[str, None] = {}
        for tree in trees:
            for node in iter_nodes(tree.root):
                if node.kind is NodeKind.RR:
                    rr[node.label] = None
                elif node.kind is NodeKind.SYNTAX:
                    syntax[node.label] = None
        return cls(tuple(syntax), tuple(rr))


@dataclass
class BiGruParams:
    """Separate parameter sets for the left-to-right and right-to-left passes."""

    fwd: nn.GruParams
    bwd: nn.GruParams

    def copy(self) -> "BiGruParams":
        return BiGruParams(self.fwd.copy(), self.bwd.copy())


@dataclass
class ModelParams:
    d: int
    mode: SharingMode
    ablation: AblationMode
    vocab: AttributeVocab
    registry: dict[str, BiGruParams]
    classifier: nn.ClassifierParams


def registry_keys(mode: SharingMode, vocab: AttributeVocab) -> list[str]:
    if mode is SharingMode.UNIFIED:
        return [UNIFIED_KEY]
    if mode is SharingMode.LEVEL_SPECIFIC:
        return [DISCOURSE_KEY, SYNTAX_KEY]
    return [*vocab.syntax_labels, *vocab.rr_labels, UNK_SYNTAX, UNK_RR]


def init_model(
    d: int,
    mode: SharingMode,
    ablation: AblationMode = AblationMode.FULL,
    vocab: AttributeVocab | None = None,
    seed: int = 0,
    rng: np.random.Generator | None = None,
    random_classifier: bool = False,
) -> ModelParams:
    """Fresh parameters: GRU matrices uniform in +-1/sqrt(fan-in), classifier
    zeroed unless ``random_classifier`` (useful for gradient checking)."""
    if d <= 0 or d % 2:
        raise DimMismatchError(f"embedding width must be a positive even integer, got {d}")
    if vocab is None:
        vocab = AttributeVocab()
    if rng is None:
        rng = np.random.default_rng(seed)
    registry = {
        key: BiGruParams(nn.GruParams.init(d, rng), nn.GruParams.init(d, rng))
        for key in registry_keys(mode, vocab)
    }
    clf = nn.ClassifierParams.init(d, rng) if random_classifier else nn.ClassifierParams.zeros(d)
    return ModelParams(d, mode, ablation, vocab, registry, clf)


def select_aggregator(params: ModelParams, parent: TreeNode, child: TreeNode) -> str:
    """Registry key for aggregating ``child`` (and its siblings) under ``parent``.

    Level-specific sharing keys on the child's level; attribute-specific
    sharing keys on the parent's label, where an EDU borrows the label of its
    leading constituency root. Labels unseen at training time fall back to
    the matching UNK entry.
    """
    if params.mode is SharingMode.UNIFIED:
        return UNIFIED_KEY
    if params.mode is SharingMode.LEVEL_SPECIFIC:
        return DISCOURSE_KEY if child.level is Level.DISCOURSE else SYNTAX_KEY
    if parent.kind is NodeKind.RR:
        return parent.label if parent.label in params.registry else UNK_RR
    if parent.kind is NodeKind.EDU:
        label = parent.children[0].label
    else:
        label = parent.label
    return label if label in params.registry else UNK_SYNTAX


@dataclass
class NodeTrace:
    key: str
    fwd: nn.GruTrace
    bwd: nn.GruTrace


@dataclass
class DocumentEncoding:
    """Document vector plus everything the backward pass needs."""

    h_doc: np.ndarray
    tree: LingTree
    node_x: dict[TreeNode, np.ndarray]
    traces: dict[TreeNode, NodeTrace]
    oov: int = 0


def encode_document(params: ModelParams, tree: LingTree, table: EmbeddingTable) -> DocumentEncoding:
    """Embed the document bottom-up under the model's sharing mode and ablation."""
    if table.dim != params.d:
        raise DimMismatchError(f"embedding table dim {table.dim} != model dim {params.d}")
    leaves = embed_leaves(table, tree)
    node_x: dict[TreeNode, np.ndarray] = dict(leaves.vectors)
    traces: dict[TreeNode, NodeTrace] = {}

    def aggregate(node: TreeNode) -> None:
        key = select_aggregator(params, node, node.children[0])
        pair = params.registry[key]
        xs = np.stack([node_x[c] for c in node.children])
        fwd = nn.gru_forward(pair.fwd, xs)
        bwd = nn.gru_forward(pair.bwd, xs[::-1])
        # Mean over positions of [fwd_i (+) bwd_i]; the mean is order-free,
        # so each half is just that direction's average hidden state.
        node_x[node] = np.concatenate([fwd.h.mean(axis=0), bwd.h.mean(axis=0)])
        traces[node] = NodeTrace(key, fwd, bwd)

    ablation = params.ablation
    if ablation is AblationMode.NO_STRUCTURE:
        words = [node_x[n] for n in iter_nodes(tree.root) if n.kind is NodeKind.WORD]
        h_doc = np.mean(words, axis=0)
    elif ablation is AblationMode.NO_DISCOURSE:
        for node in post_order(tree.root):
            if node.kind in (NodeKind.SYNTAX, NodeKind.EDU):
                aggregate(node)
        edus = edu_nodes(tree)
        h_doc = np.mean([node_x[e] for e in edus], axis=0)
    elif ablation is AblationMode.NO_SYNTAX:
        for edu in edu_nodes(tree):
            words = [node_x[n] for n in iter_nodes(edu) if n.kind is NodeKind.WORD]
            node_x[edu] = np.mean(words, axis=0)
        for node in post_order(tree.root):
            if node.kind is NodeKind.RR:
                aggregate(node)
        h_doc = node_x[tree.root]
    else:
        for node in post_order(tree.root):
            if node.kind is not NodeKind.WORD:
                aggregate(node)
        h_doc = node_x[tree.root]
    return DocumentEncoding(h_doc, tree, node_x, traces, leaves.oov)


def predict(params: ModelParams, enc: DocumentEncoding) -> float:
    """Probability that the encoded document is fake."""
    p_fake, _ = nn.softmax_ce(params.classifier, enc.h_doc, 1)
    return p_fake


def zeros_like_model(params: ModelParams) -> ModelParams:
    """A parameter container of the same shape filled with zeros."""
    registry = {
        key: BiGruParams(nn.GruParams.zeros(params.d), nn.GruParams.zeros(params.d))
        for key in params.registry
    }
    return ModelParams(
        params.d, params.mode, params.ablation, params.vocab,
        registry, nn.ClassifierParams.zeros(params.d),
    )


def copy_model(params: ModelParams) -> ModelParams:
    registry = {key: pair.copy() for key, pair in params.registry.items()}
    return ModelParams(
        params.d, params.mode, params.ablation, params.vocab,
        registry, params.classifier.copy(),
    )


def _add_gru(acc: nn.GruParams, grads: nn.GruParams) -> None:
    for a, g in zip(acc.matrices(), grads.matrices()):
        a += g


def backward(params: ModelParams, enc: DocumentEncoding, y: int) -> ModelParams:
    """Gradients of the document's cross-entropy loss w.r.t. all parameters.

    Walks the tree in reverse post-order so contributions of a registry key
    reused at several nodes accumulate in a fixed order. Word-embedding
    gradients are dropped (embeddings are frozen). The result reuses the
    ModelParams container, holding gradients instead of weights.
    """
    grads = zeros_like_model(params)
    dw, db, dh = nn.softmax_ce_backward(params.classifier, enc.h_doc, y)
    grads.classifier.w += dw
    grads.classifier.b += db

    ablation = params.ablation
    if ablation is AblationMode.NO_STRUCTURE:
        return grads

    hd = params.d // 2
    pending: dict[TreeNode, np.ndarray] = {}
    if ablation is AblationMode.NO_DISCOURSE:
        edus = edu_nodes(enc.tree)
        share = dh / len(edus)
        for edu in edus:
            pending[edu] = share
    else:
        pending[enc.tree.root] = dh

    for node in reversed(post_order(enc.tree.root)):
        grad = pending.pop(node, None)
        if grad is None or node.kind is NodeKind.WORD:
            continue
        trace = enc.traces.get(node)
        if trace is None:
            if ablation is AblationMode.NO_SYNTAX and node.kind is NodeKind.EDU:
                continue  # EDU vector was a word average; below is frozen
            raise MissingTraceError(f"no forward trace for {node.kind.value} node {node.label!r}")
        k = len(node.children)
        up_fwd = np.tile(grad[:hd] / k, (k, 1))
        up_bwd = np.tile(grad[hd:] / k, (k, 1))
        pair = params.registry[trace.key]
        acc = grads.registry[trace.key]
        g_fwd, dx_fwd = nn.gru_backward(pair.fwd, trace.fwd, up_fwd)
        g_bwd, dx_bwd = nn.gru_backward(pair.bwd, trace.bwd, up_bwd[::-1])
        _add_gru(acc.fwd, g_fwd)
        _add_gru(acc.bwd, g_bwd)
        dx_bwd = dx_bwd[::-1]  # back to original child order
        for idx, child in enumerate(node.children):
            if child.kind is not NodeKind.WORD:
                pending[child] = dx_fwd[idx] + dx_bwd[idx]
    return grads


def _param_arrays(params: ModelParams):
    """All learnable tensors in a fixed, documented order."""
    for key in params.registry:
        pair = params.registry[key]
        for gru in (pair.fwd, pair.bwd):
            yield from gru.matrices()
    yield params.classifier.w
    yield params.classifier.b


def param_count(params: ModelParams) -> int:
    return sum(a.size for a in _param_arrays(params))


def params_to_vec(params: ModelParams) -> np.ndarray:
    return np.concatenate([a.ravel() for a in _param_arrays(params)])


def vec_to_params(params: ModelParams, vec: np.ndarray) -> None:
    """Write a flat vector back into the model's tensors, in place."""
    vec = np.asarray(vec, dtype=np.float64)
    if vec.size != param_count(params):
        raise nn.ShapeMismatchError(f"vector size {vec.size} != parameter count {param_count(params)}")
    offset = 0
    for a in _param_arrays(params):
        a[...] = vec[offset:offset + a.size].reshape(a.shape)
        offset += a.size


def gradient_check_model(
    params: ModelParams,
    tree: LingTree,
    table: EmbeddingTable,
    y: int = 1,
    step: float = 3e-4,
) -> float:
    """Worst relative error of the full-model analytic gradient vs central
    finite differences on one document.

    The default step is larger than finite_diff_check's because the loss here
    is O(1) while many deep parameters have gradients near the 1e-8 error
    floor; 3e-4 keeps the difference-quotient roundoff below that floor.
    """
    enc = encode_document(params, tree, table)
    grads = backward(params, enc, y)
    work = copy_model(params)

    def loss_at(vec: np.ndarray) -> float:
        vec_to_params(work, vec)
        e = encode_document(work, tree, table)
        _, loss = nn.softmax_ce(work.classifier, e.h_doc, y)
        return loss

    return nn.finite_diff_check(loss_at, params_to_vec(params), params_to_vec(grads), step)


def _gru_to_lists(gru: nn.GruParams) -> dict:
    return {
        "W_r": gru.w_r.tolist(), "W_z": gru.w_z.tolist(), "W_h": gru.w_h.tolist(),
        "U_r": gru.u_r.tolist(), "U_z": gru.u_z.tolist(), "U_h": gru.u_h.tolist(),
    }


def _gru_from_lists(doc: dict, d: int) -> nn.GruParams:
    hd = d // 2
    shapes = {"W_r": (hd, d), "W_z": (hd, d), "W_h": (hd, d),
              "U_r": (hd, hd), "U_z": (hd, hd), "U_h": (hd, hd)}
    mats = {}
    for name, shape in shapes.items():
        arr = np.array(doc[name], dtype=np.float64)
        if arr.shape != shape:
            raise CorruptCheckpointError(f"matrix {name} has shape {arr.shape}, expected {shape}")
        mats[name] = arr
    return nn.GruParams(mats["W_r"], mats["W_z"], mats["W_h"],
                        mats["U_r"], mats["U_z"], mats["U_h"])


def save_model(params: ModelParams, path) -> None:
    """Write a self-describing JSON checkpoint with full float precision."""
    doc = {
        "version": CHECKPOINT_VERSION,
        "mode": params.mode.value,
        "ablation": params.ablation.value,
        "d": params.d,
        "attribute_vocab": {
            "syntax": list(params.vocab.syntax_labels),
            "rr": list(params.vocab.rr_labels),
        },
        "registry": {
            key: {"fwd": _gru_to_lists(pair.fwd), "bwd": _gru_to_lists(pair.bwd)}
            for key, pair in params.registry.items()
        },
        "classifier": {"W": params.classifier.w.tolist(), "b": params.classifier.b.tolist()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_model(path) -> ModelParams:
    """Inverse of save_model; predictions of the loaded model are bit-identical."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptCheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    if not isinstance(doc, dict) or "version" not in doc:
        raise CorruptCheckpointError(f"{path} is not a model checkpoint")
    if doc["version"] != CHECKPOINT_VERSION:
        raise VersionMismatchError(
            f"checkpoint version {doc['version']!r}, this build reads {CHECKPOINT_VERSION}"
        )
    try:
        mode = SharingMode(doc["mode"])
        ablation = AblationMode(doc["ablation"])
        d = int(doc["d"])
        vocab = AttributeVocab(
            tuple(doc["attribute_vocab"]["syntax"]),
            tuple(doc["attribute_vocab"]["rr"]),
        )
        expected = registry_keys(mode, vocab)
        stored = doc["registry"]
        if sorted(stored) != sorted(expected):
            raise CorruptCheckpointError("registry keys do not match mode and vocabulary")
        registry = {
            key: BiGruParams(_gru_from_lists(stored[key]["fwd"], d),
                             _gru_from_lists(stored[key]["bwd"], d))
            for key in expected
        }
        w = np.array(doc["classifier"]["W"], dtype=np.float64)
        b = np.array(doc["classifier"]["b"], dtype=np.float64)
        if w.shape != (2, d) or b.shape != (2,):
            raise CorruptCheckpointError(f"classifier shapes {w.shape}, {b.shape} do not match d={d}")
        clf = nn.ClassifierParams(w, b)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (CorruptCheckpointError, VersionMismatchError)):
            raise
        raise CorruptCheckpointError(f"malformed checkpoint {path}: {exc}") from exc
    return ModelParams(d, mode, ablation, vocab, registry, clf)
