"""Single-file model container.

Layout::

    VERITEXT-ARTIFACT
    format_version = 1
    model = svm
    ...                       (key = value header lines)
    [config]                  (experiment config snapshot, INI text)
    ...
    END-HEADER <n>            (n = byte length of the parameter section)
    <n bytes>

The parameter section is a sequence of named arrays. Each record is a
little-endian ``u32`` name length, the UTF-8 name, one type byte (``f``
float64, ``i`` int64, ``s`` newline-joined UTF-8 strings), a ``u32`` rank,
``u64`` dimensions and the raw little-endian payload.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from .corpus import Pipeline
from .encoder import EncoderConfig, EncoderModel, TokenVocab
from .features import EmbeddingTable, TfidfModel, Vocabulary
from .linear import LinearKind, LinearModel, NaiveBayesModel
from .pipeline import TextClassifier
from .trees import BoostedModel, ForestModel, Tree

MAGIC = "VERITEXT-ARTIFACT"
FORMAT_VERSION = 1


class ArtifactError(ValueError):
    pass


class ArtifactVersionError(ArtifactError):
    pass


# ---------------------------------------------------------------------------
# parameter section


def _write_array(buf: io.BytesIO, name: str, value) -> None:
    raw_name = name.encode("utf-8")
    buf.write(struct.pack("<I", len(raw_name)))
    buf.write(raw_name)
    if isinstance(value, list):
        payload = "\n".join(value).encode("utf-8")
        buf.write(b"s" + struct.pack("<IQ", 1, len(value)))
        buf.write(struct.pack("<Q", len(payload)))
        buf.write(payload)
        return
    arr = np.asarray(value)
    if arr.dtype.kind in "iub":
        code, arr = b"i", arr.astype("<i8")
    else:
        code, arr = b"f", arr.astype("<f8")
    buf.write(code + struct.pack("<I", arr.ndim))
    buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    buf.write(np.ascontiguousarray(arr).tobytes())


def _read_arrays(blob: bytes) -> dict:
    out = {}
    view = memoryview(blob)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise ArtifactError("parameter section is truncated")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    while pos < len(view):
        (name_len,) = struct.unpack("<I", take(4))
        name = bytes(take(name_len)).decode("utf-8")
        code = bytes(take(1))
        (ndim,) = struct.unpack("<I", take(4))
        if code == b"s":
            (count,) = struct.unpack("<Q", take(8))
            (size,) = struct.unpack("<Q", take(8))
            text = bytes(take(size)).decode("utf-8")
            out[name] = text.split("\n") if count else []
            continue
        shape = struct.unpack(f"<{ndim}Q", take(8 * ndim))
        dtype = {b"f": "<f8", b"i": "<i8"}.get(code)
        if dtype is None:
            raise ArtifactError(f"unknown array type {code!r} for {name!r}")
        n = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(bytes(take(8 * n)), dtype=dtype).reshape(shape)
        out[name] = arr.astype(np.float64 if code == b"f" else np.int64)
    return out


# ---------------------------------------------------------------------------
# per-kind encoders


def _vocab_arrays(prefix: str, vocab: Vocabulary) -> dict:
    return {prefix + "tokens": list(vocab.tokens), prefix + "doc_freq": vocab.doc_freq,
            prefix + "n_docs": np.array([vocab.n_docs])}


def _vocab_from(prefix: str, arrays: dict) -> Vocabulary:
    return Vocabulary(arrays[prefix + "tokens"], arrays[prefix + "doc_freq"], int(arrays[prefix + "n_docs"][0]))


def _trees_arrays(trees: list[Tree]) -> dict:
    return {
        "trees.sizes": np.array([t.n_nodes for t in trees], dtype=np.int64),
        "trees.feature": np.concatenate([t.feature for t in trees]),
        "trees.threshold": np.concatenate([t.threshold for t in trees]),
        "trees.left": np.concatenate([t.left for t in trees]),
        "trees.right": np.concatenate([t.right for t in trees]),
        "trees.value": np.concatenate([t.value for t in trees]),
    }


def _trees_from(arrays: dict) -> list[Tree]:
    bounds = np.r_[0, np.cumsum(arrays["trees.sizes"])]
    keys = ("feature", "threshold", "left", "right", "value")
    return [Tree(*(arrays[f"trees.{k}"][lo:hi].copy() for k in keys)) for lo, hi in zip(bounds[:-1], bounds[1:])]


def _model_arrays(clf: TextClassifier) -> dict:
    arrays: dict = {}
    f = clf.featurizer
    if isinstance(f, TfidfModel):
        arrays.update(_vocab_arrays("tfidf.", f.vocabulary))
        arrays["tfidf.idf"] = f.idf
    elif isinstance(f, EmbeddingTable):
        arrays.update(_vocab_arrays("w2v.", f.vocabulary))
        arrays["w2v.input_vectors"] = f.input_vectors
    elif isinstance(f, TokenVocab):
        arrays["vocab.tokens"] = list(f.tokens)

    m = clf.model
    if isinstance(m, NaiveBayesModel):
        arrays.update({"nb.log_prior": m.log_prior, "nb.log_likelihood": m.log_likelihood,
                       "nb.alpha": np.array([m.alpha])})
    elif isinstance(m, LinearModel):
        arrays.update({"linear.weights": m.weights, "linear.bias": np.array([m.bias]),
                       "linear.reg": np.array([m.reg])})
    elif isinstance(m, ForestModel):
        arrays.update(_trees_arrays(m.trees))
        arrays.update({"forest.seeds": [str(s) for s in m.seeds],
                       "forest.meta": np.array([m.max_features, m.n_features])})
    elif isinstance(m, BoostedModel):
        arrays.update(_trees_arrays(m.trees))
        arrays.update({"boost.scalars": np.array([m.base_score, m.learning_rate, m.reg]),
                       "boost.n_features": np.array([m.n_features])})
    elif isinstance(m, EncoderModel):
        c = m.config
        arrays["encoder.config"] = np.array([c.vocab_size, c.d_model, c.heads, c.layers, c.d_ff, c.max_len, c.seed])
        for name, value in m.params.items():
            arrays["encoder." + name] = value
    else:
        raise ArtifactError(f"cannot serialize model of type {type(m).__name__}")
    return arrays


def _rebuild(header: dict, config_snapshot: str, arrays: dict) -> TextClassifier:
    kind, features = header["model"], header["features"]
    if features == "tfidf":
        vocab = _vocab_from("tfidf.", arrays)
        featurizer = TfidfModel(vocab, arrays["tfidf.idf"])
    elif features == "word2vec":
        vocab = _vocab_from("w2v.", arrays)
        vectors = arrays["w2v.input_vectors"]
        featurizer = EmbeddingTable(vocab, vectors, np.zeros((0, vectors.shape[1])))
    else:
        featurizer = TokenVocab(arrays["vocab.tokens"])

    if kind == "nb":
        model = NaiveBayesModel(arrays["nb.log_prior"], arrays["nb.log_likelihood"], float(arrays["nb.alpha"][0]))
    elif kind in ("logreg", "svm"):
        model = LinearModel(arrays["linear.weights"], float(arrays["linear.bias"][0]),
                            LinearKind.LOGISTIC if kind == "logreg" else LinearKind.SVM,
                            float(arrays["linear.reg"][0]))
    elif kind == "forest":
        meta = arrays["forest.meta"]
        model = ForestModel(_trees_from(arrays), [int(s) for s in arrays["forest.seeds"]], int(meta[0]), int(meta[1]))
    elif kind == "boost":
        base, lr, reg = arrays["boost.scalars"]
        model = BoostedModel(float(base), _trees_from(arrays), float(lr), float(reg), int(arrays["boost.n_features"][0]))
    elif kind == "encoder":
        v, d, h, layers, ff, max_len, seed = (int(x) for x in arrays["encoder.config"])
        cfg = EncoderConfig(v, d, h, layers, ff, max_len, seed)
        params = {k[len("encoder."):]: arrays[k] for k in arrays
                  if k.startswith("encoder.") and k != "encoder.config"}
        model = EncoderModel(cfg, params)
    else:
        raise ArtifactError(f"unknown model kind {kind!r}")
    return TextClassifier(kind, features, Pipeline(header["pipeline"]), header["keep"], featurizer, model,
                          config_snapshot, header["stopwords_sha256"])


# ---------------------------------------------------------------------------
# public API


def dumps(clf: TextClassifier) -> bytes:
    params = io.BytesIO()
    for name, value in _model_arrays(clf).items():
        _write_array(params, name, value)
    blob = params.getvalue()
    header = [
        MAGIC,
        f"format_version = {FORMAT_VERSION}",
        f"model = {clf.model_kind}",
        f"features = {clf.features}",
        f"pipeline = {clf.pipeline.value}",
        f"keep = {clf.keep}",
        f"stopwords_sha256 = {clf.stopwords_sha256}",
        "[config]",
        *clf.config_snapshot.rstrip("\n").split("\n"),
        f"END-HEADER {len(blob)}",
    ]
    return ("\n".join(header) + "\n").encode("utf-8") + blob


def loads(data: bytes) -> TextClassifier:
    marker = data.find(b"\nEND-HEADER ")
    if not data.startswith(MAGIC.encode()) or marker < 0:
        raise ArtifactError("not a veritext model artifact")
    line_end = data.index(b"\n", marker + 1)
    size = int(data[marker + len(b"\nEND-HEADER "):line_end])
    blob = data[line_end + 1:]
    if len(blob) != size:
        raise ArtifactError(f"parameter section is {len(blob)} bytes, header says {size}")
    lines = data[:marker].decode("utf-8").split("\n")[1:]
    split_at = lines.index("[config]") if "[config]" in lines else len(lines)
    header = {}
    for line in lines[:split_at]:
        key, _, value = line.partition(" = ")
        header[key.strip()] = value
    version = header.get("format_version", "")
    if version != str(FORMAT_VERSION):
        raise ArtifactVersionError(
            f"artifact format version {version!r} is not supported (expected {FORMAT_VERSION})"
        )
    snapshot = "\n".join(lines[split_at + 1:]) + "\n"
    return _rebuild(header, snapshot, _read_arrays(blob))


def save(clf: TextClassifier, path) -> None:
    Path(path).write_bytes(dumps(clf))


def load(path) -> TextClassifier:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ArtifactError(f"cannot read model file {path}: {exc.strerror}") from exc
    return loads(data)
