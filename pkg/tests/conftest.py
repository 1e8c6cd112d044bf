import numpy as np
import pytest

from synthetic import make_corpus, write_corpus

SMALL_CONFIG = """
[experiment]
seed = 42
cells = {cells}
record_seconds = {record}

[data]
train = train.csv
validation = val.csv
test = test.csv

[word2vec]
dim = 16
epochs = 2

[forest]
n_trees = 5

[boost]
rounds = 5

[encoder]
d_model = 16
heads = 2
layers = 1
d_ff = 32
max_len = 32
epochs = 1

[output]
csv = out/results.csv
table = out/results.txt
"""


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory):
    """Train / validation / test files cut from one synthetic corpus."""
    root = tmp_path_factory.mktemp("data")
    corpus = make_corpus(260, seed=21)
    parts = {"train.csv": corpus.posts[:160], "val.csv": corpus.posts[160:200], "test.csv": corpus.posts[200:]}
    from veritext.corpus import Corpus
    for name, posts in parts.items():
        write_corpus(Corpus(posts), root / name)
    return root


def write_config(directory, cells="svm:tfidf", record="false", extra=""):
    path = directory / "exp.config"
    path.write_text(SMALL_CONFIG.format(cells=cells, record=record) + extra)
    return path
