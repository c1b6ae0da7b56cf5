"""Streaming detector state machine and the ARLF model file format.

A Detector owns a frozen isolation forest and preprocessor, the trainable
attention parameters, and one k-length probability history per tree
(kept as a T x k matrix whose last column is the most recent response).
observe() scores a record; learn() additionally applies one online SGD
update to the attention layer. Nothing ever mutates the forest or the
preprocessor after construction.

Model files are versioned little-endian binary ("ARLF" magic), 64-bit
reals throughout:

    header      magic 4s | version u16 | flags u16 | k u32 | T u32 |
                psi u32 | m u32 | tau f64 | eta f64 | samples_seen u64
    pre         selected m*u32 | min_max 41*2 f64 | vocab: per categorical
                column count u32 then (len u32 + utf-8 bytes) per token
    forest      per tree: n_nodes u32 + n_nodes * 28-byte node records
                (feature i32, threshold f64, left i32, right i32,
                 size i32, depth i32); leaves carry feature = -1
    attention   Wq, Wk, Wv (k*k f64 each), bq, bk, bv (k f64),
                histories (T*k f64)   -- present iff flags bit 0

flags bit 0 cleared writes a forest-only payload: it exists so baseline
model size can be measured on real bytes, and such files are not loadable
back into a streaming detector.
"""

from __future__ import annotations

import math
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .attention import AttentionParams, backward, bce_loss, forward, sgd_step
from .errors import (
    BadMagic,
    DimensionMismatch,
    EmptyStream,
    TruncatedFile,
    VersionUnsupported,
)
from .iforest import IsolationForest, IsolationTree, c_factor, tree_proba
from .ingest import CATEGORICAL_COLUMNS, N_FEATURES, Preprocessor, Record, transform

MAGIC = b"ARLF"
FORMAT_VERSION = 1
_FLAG_ATTENTION = 0x0001

_HEADER = struct.Struct("<4sHHIIIIddQ")
_NODE_DTYPE = np.dtype(
    [("f", "<i4"), ("t", "<f8"), ("l", "<i4"), ("r", "<i4"), ("s", "<i4"), ("d", "<i4")],
    align=False,
)


@dataclass
class DetectionResult:
    score: float
    predicted: int
    latency_ns: int


@dataclass
class TrainingReport:
    mean_losses: list[float]  # one entry per epoch
    samples_per_epoch: int


@dataclass
class Detector:
    forest: IsolationForest
    params: AttentionParams
    pre: Preprocessor
    histories: np.ndarray  # T x k, column k-1 most recent
    tau: float
    eta: float
    samples_seen: int = 0
    _cache: object = field(default=None, repr=False, compare=False)


def new_detector(
    forest: IsolationForest,
    params: AttentionParams,
    pre: Preprocessor,
    tau: float = 0.5,
    eta: float = 0.05,
) -> Detector:
    """Fresh detector; every history slot starts at the neutral 0.5."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0,1), got {tau}")
    if eta <= 0.0:
        raise ValueError(f"eta must be > 0, got {eta}")
    if forest.n_trees < 1:
        raise ValueError("forest has no trees")
    if pre.m != forest.n_features:
        raise DimensionMismatch(
            f"preprocessor emits {pre.m} features, forest was built on {forest.n_features}"
        )
    histories = np.full((forest.n_trees, params.k), 0.5)
    return Detector(forest=forest, params=params, pre=pre, histories=histories,
                    tau=tau, eta=eta, samples_seen=0)


def observe(det: Detector, r: Record) -> DetectionResult:
    """Score one record: push per-tree probas into the histories, run the
    attention forward pass, threshold at tau. The forward cache is retained
    for an immediately following learn() on the same record."""
    t0 = time.perf_counter_ns()
    x = transform(det.pre, r)
    c_psi = det.forest.c_psi
    probas = [tree_proba(tree, x, c_psi) for tree in det.forest.trees]
    H = det.histories
    H[:, :-1] = H[:, 1:]
    H[:, -1] = probas
    s, cache = forward(det.params, H)
    latency = time.perf_counter_ns() - t0
    det.samples_seen += 1
    det._cache = cache
    return DetectionResult(score=s, predicted=1 if s >= det.tau else 0, latency_ns=latency)


def learn(det: Detector, r: Record, label: int) -> float:
    """observe, then one BCE/SGD update of the attention layer only."""
    observe(det, r)
    cache = det._cache
    grads = backward(det.params, cache, label)
    sgd_step(det.params, grads, det.eta)
    return bce_loss(cache.s, label)


def train_online(det: Detector, records, epochs: int = 1) -> TrainingReport:
    """One learn() per sample in stream order, per epoch.

    Histories are deliberately not reset between epochs: the stream is
    treated as continuous.
    """
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    records = list(records)
    if not records:
        raise EmptyStream("training stream is empty")
    means = []
    for _ in range(epochs):
        total = 0.0
        for r in records:
            total += learn(det, r, r.label)
        means.append(total / len(records))
    return TrainingReport(mean_losses=means, samples_per_epoch=len(records))


# --- serialization ---------------------------------------------------------

def _pre_bytes(pre: Preprocessor) -> bytes:
    out = [np.asarray(pre.selected, dtype="<u4").tobytes()]
    out.append(np.asarray(pre.min_max, dtype="<f8").tobytes())
    for col in sorted(pre.vocab):
        toks = pre.vocab[col]
        out.append(struct.pack("<I", len(toks)))
        for tok in toks:
            raw = tok.encode("utf-8")
            out.append(struct.pack("<I", len(raw)) + raw)
    return b"".join(out)


def _tree_records(tree: IsolationTree) -> np.ndarray:
    rec = np.empty(tree.n_nodes, dtype=_NODE_DTYPE)
    rec["f"] = tree.feature
    rec["t"] = tree.threshold
    rec["l"] = tree.left
    rec["r"] = tree.right
    rec["s"] = tree.size
    rec["d"] = tree.depth
    return rec


def forest_bytes(forest: IsolationForest) -> bytes:
    """The forest segment exactly as it appears inside a model file."""
    out = []
    for tree in forest.trees:
        out.append(struct.pack("<I", tree.n_nodes))
        out.append(_tree_records(tree).tobytes())
    return b"".join(out)


def attention_params_bytes(params: AttentionParams) -> bytes:
    """The parameter segment: 8 * 3k(k+1) bytes of 64-bit reals."""
    return b"".join(
        np.ascontiguousarray(b, dtype="<f8").tobytes() for b in params.blocks()
    )


def to_bytes(det: Detector, include_attention: bool = True) -> bytes:
    flags = _FLAG_ATTENTION if include_attention else 0
    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        flags,
        det.params.k,
        det.forest.n_trees,
        det.forest.psi,
        det.pre.m,
        det.tau,
        det.eta,
        det.samples_seen,
    )
    parts = [header, _pre_bytes(det.pre), forest_bytes(det.forest)]
    if include_attention:
        parts.append(attention_params_bytes(det.params))
        parts.append(np.ascontiguousarray(det.histories, dtype="<f8").tobytes())
    return b"".join(parts)


def model_size_bytes(det: Detector, include_attention: bool = True) -> int:
    """Exact byte length of the serialized model."""
    return len(to_bytes(det, include_attention))


def save_model(det: Detector, sink) -> None:
    """Write the model to a path or binary file object."""
    data = to_bytes(det)
    if hasattr(sink, "write"):
        sink.write(data)
    else:
        with open(sink, "wb") as fh:
            fh.write(data)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedFile(
                f"needed {n} bytes at offset {self.pos}, file has {len(self.buf)}"
            )
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64_array(self, count: int, shape=None) -> np.ndarray:
        a = np.frombuffer(self.take(count * 8), dtype="<f8").copy()
        return a.reshape(shape) if shape is not None else a


def from_bytes(data: bytes) -> Detector:
    rd = _Reader(data)
    if rd.take(4) != MAGIC:
        raise BadMagic("not an ARLF model file")
    rd.pos = 0
    magic, version, flags, k, T, psi, m, tau, eta, samples_seen = _HEADER.unpack(
        rd.take(_HEADER.size)
    )
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"format version {version}, this build reads {FORMAT_VERSION}")
    if not flags & _FLAG_ATTENTION:
        raise VersionUnsupported(
            "forest-only payload (flags bit 0 clear) cannot back a streaming detector"
        )

    selected = np.frombuffer(rd.take(4 * m), dtype="<u4").astype(int).tolist()
    mm = rd.f64_array(N_FEATURES * 2, (N_FEATURES, 2))
    min_max = [(float(lo), float(hi)) for lo, hi in mm]
    vocab: dict[int, list[str]] = {}
    for col in sorted(CATEGORICAL_COLUMNS):
        count = rd.u32()
        toks = []
        for _ in range(count):
            ln = rd.u32()
            toks.append(rd.take(ln).decode("utf-8"))
        vocab[col] = toks
    pre = Preprocessor(vocab=vocab, min_max=min_max, selected=selected, m=m)

    trees = []
    for _ in range(T):
        n_nodes = rd.u32()
        rec = np.frombuffer(rd.take(n_nodes * _NODE_DTYPE.itemsize), dtype=_NODE_DTYPE)
        trees.append(
            IsolationTree(
                feature=rec["f"].astype(int).tolist(),
                threshold=rec["t"].astype(float).tolist(),
                left=rec["l"].astype(int).tolist(),
                right=rec["r"].astype(int).tolist(),
                size=rec["s"].astype(int).tolist(),
                depth=rec["d"].astype(int).tolist(),
            )
        )
    forest = IsolationForest(
        trees=trees,
        psi=psi,
        c_psi=c_factor(psi),
        height_limit=int(math.ceil(math.log2(psi))),
        n_features=m,
    )

    params = AttentionParams(
        Wq=rd.f64_array(k * k, (k, k)),
        Wk=rd.f64_array(k * k, (k, k)),
        Wv=rd.f64_array(k * k, (k, k)),
        bq=rd.f64_array(k),
        bk=rd.f64_array(k),
        bv=rd.f64_array(k),
        k=k,
    )
    histories = rd.f64_array(T * k, (T, k))
    if rd.pos != len(data):
        raise TruncatedFile(f"{len(data) - rd.pos} trailing bytes after model payload")
    return Detector(
        forest=forest,
        params=params,
        pre=pre,
        histories=histories,
        tau=tau,
        eta=eta,
        samples_seen=samples_seen,
    )


def load_model(source) -> Detector:
    """Read a model from a path or binary file object."""
    if hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as fh:
            data = fh.read()
    return from_bytes(data)
