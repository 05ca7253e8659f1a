"""Spam recognition for event texts.

Four classifiers over bag-of-words features: multinomial Naive Bayes with
additive smoothing (the default), k-nearest-neighbors by cosine distance,
a mistake-driven perceptron and a single-hidden-layer MLP. Quality is
reported as spam recall ("efficiency"), overall accuracy and false positive
rate. Every tie breaks toward ham: wrongly blocking a real event costs more
trust than letting one spam event through.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mlp import Mlp
from .model import EventRecord
from .text import tokenize

SPAM = "spam"
HAM = "ham"

TokenVector = dict  # token -> positive count


@dataclass
class LabeledExample:
    features: object  # TokenVector for nb/knn, 1-d ndarray for perceptron/mlp
    label: str

    def __post_init__(self):
        if self.label not in (SPAM, HAM):
            raise ValueError(f"unknown label {self.label!r}")


class DegenerateCorpus(ValueError):
    pass


# ----------------------------------------------------------------- Naive Bayes

@dataclass
class NaiveBayesModel:
    prior_spam: float
    prior_ham: float
    token_counts: dict[str, dict[str, int]]  # label -> token -> count
    mass: dict[str, int]                     # label -> total token count
    vocab_size: int
    alpha: float

    def token_prob(self, label: str, token: str) -> float:
        count = self.token_counts[label].get(token, 0)
        return (count + self.alpha) / (self.mass[label] + self.alpha * self.vocab_size)

    def to_doc(self) -> dict:
        doc: dict = {
            "prior_spam": self.prior_spam,
            "prior_ham": self.prior_ham,
            "vocab_size": self.vocab_size,
            "alpha": self.alpha,
            "mass": dict(self.mass),
        }
        for label in (SPAM, HAM):
            if self.token_counts[label]:
                doc[f"counts_{label}"] = dict(self.token_counts[label])
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "NaiveBayesModel":
        return cls(
            prior_spam=float(doc["prior_spam"]),
            prior_ham=float(doc["prior_ham"]),
            token_counts={
                SPAM: {t: int(c) for t, c in doc.get("counts_spam", {}).items()},
                HAM: {t: int(c) for t, c in doc.get("counts_ham", {}).items()},
            },
            mass={label: int(doc["mass"][label]) for label in (SPAM, HAM)},
            vocab_size=int(doc["vocab_size"]),
            alpha=float(doc["alpha"]),
        )


def nb_train(corpus: list[LabeledExample], alpha: float = 1.0) -> NaiveBayesModel:
    """Multinomial NB: priors from class frequencies, token probabilities
    smoothed by alpha over the joint vocabulary."""
    labels = {ex.label for ex in corpus}
    if labels != {SPAM, HAM}:
        raise DegenerateCorpus("degenerate corpus: need both spam and ham examples")
    token_counts = {SPAM: {}, HAM: {}}
    mass = {SPAM: 0, HAM: 0}
    n_docs = {SPAM: 0, HAM: 0}
    vocab = set()
    for ex in corpus:
        n_docs[ex.label] += 1
        for token, count in ex.features.items():
            vocab.add(token)
            token_counts[ex.label][token] = token_counts[ex.label].get(token, 0) + count
            mass[ex.label] += count
    total = len(corpus)
    return NaiveBayesModel(
        prior_spam=n_docs[SPAM] / total,
        prior_ham=n_docs[HAM] / total,
        token_counts=token_counts,
        mass=mass,
        vocab_size=len(vocab),
        alpha=alpha,
    )


def nb_classify(model: NaiveBayesModel, text: str) -> tuple[str, float]:
    """(label, P(spam | text)). Log-space scoring with log-sum-exp
    normalization; a posterior of exactly 0.5 labels ham."""
    counts = tokenize(text)
    log_spam = math.log(model.prior_spam) if model.prior_spam > 0 else -math.inf
    log_ham = math.log(model.prior_ham) if model.prior_ham > 0 else -math.inf
    for token, count in counts.items():
        if log_spam > -math.inf:
            p = model.token_prob(SPAM, token)
            log_spam = log_spam + count * math.log(p) if p > 0 else -math.inf
        if log_ham > -math.inf:
            p = model.token_prob(HAM, token)
            log_ham = log_ham + count * math.log(p) if p > 0 else -math.inf
    if log_spam == -math.inf and log_ham == -math.inf:
        posterior = 0.5
    else:
        hi = max(log_spam, log_ham)
        posterior = math.exp(log_spam - hi) / (math.exp(log_spam - hi) + math.exp(log_ham - hi))
    return (SPAM if posterior > 0.5 else HAM), posterior


# ------------------------------------------------------------------ perceptron

@dataclass
class PerceptronModel:
    w: np.ndarray
    b: float


def _label_sign(label: str) -> int:
    return 1 if label == SPAM else -1


def perceptron_train(corpus: list[LabeledExample], epochs: int,
                     learning_rate: float = 1.0) -> PerceptronModel:
    model, _ = perceptron_train_trace(corpus, epochs, learning_rate)
    return model


def perceptron_train_trace(corpus: list[LabeledExample], epochs: int,
                           learning_rate: float = 1.0,
                           update_bias: bool = True):
    """Mistake-driven training from w=0, b=0 in deterministic corpus order;
    stops early at the first epoch with zero mistakes. Also returns the
    mistake trace as (epoch, example_index) pairs."""
    if not corpus:
        raise ValueError("empty corpus")
    dim = len(corpus[0].features)
    if any(len(ex.features) != dim for ex in corpus):
        raise ValueError("examples must share one dimension")
    w = np.zeros(dim, dtype=float)
    b = 0.0
    trace = []
    for epoch in range(epochs):
        mistakes = 0
        for i, ex in enumerate(corpus):
            x = np.asarray(ex.features, dtype=float)
            y = _label_sign(ex.label)
            if y * (float(w @ x) + b) <= 0:
                w = w + learning_rate * y * x
                if update_bias:
                    b = b + learning_rate * y
                mistakes += 1
                trace.append((epoch, i))
        if mistakes == 0:
            break
    return PerceptronModel(w=w, b=b), trace


def perceptron_classify(model: PerceptronModel, x) -> str:
    """Sign of w.x + b; the boundary itself goes to ham."""
    score = float(model.w @ np.asarray(x, dtype=float)) + model.b
    return SPAM if score > 0 else HAM


# ------------------------------------------------------------------------- kNN

@dataclass
class KnnModel:
    examples: list[LabeledExample]
    k: int

    def __post_init__(self):
        if self.k <= 0 or self.k % 2 == 0:
            raise ValueError("k must be odd and positive")
        if self.k > len(self.examples):
            raise ValueError("k larger than corpus")


def cosine_distance(a: TokenVector, b: TokenVector) -> float:
    dot = sum(count * b.get(token, 0) for token, count in a.items())
    na = math.sqrt(sum(c * c for c in a.values()))
    nb = math.sqrt(sum(c * c for c in b.values()))
    if na == 0 or nb == 0:
        return 1.0
    return 1.0 - dot / (na * nb)


def knn_classify(model: KnnModel, features: TokenVector) -> str:
    """Majority label among the k nearest by cosine distance; distance ties
    break by stored order (stable sort on index)."""
    ranked = sorted(
        (cosine_distance(features, ex.features), i)
        for i, ex in enumerate(model.examples)
    )
    votes = sum(_label_sign(model.examples[i].label) for _, i in ranked[: model.k])
    return SPAM if votes > 0 else HAM


# ------------------------------------------------------------------------- MLP

def mlp_train(corpus: list[LabeledExample], hidden_size: int, epochs: int,
              learning_rate: float, seed: int = 0) -> Mlp:
    """Binary cross-entropy MLP over dense inputs; labels map spam=1, ham=0."""
    if hidden_size <= 0:
        raise ValueError("hidden_size must be positive")
    if not corpus:
        raise ValueError("empty corpus")
    x = np.stack([np.asarray(ex.features, dtype=float) for ex in corpus])
    y = np.array([[1.0 if ex.label == SPAM else 0.0] for ex in corpus])
    net = Mlp(x.shape[1], hidden_size, 1, seed=seed, loss="bce")
    net.train(x, y, epochs=epochs, learning_rate=learning_rate)
    return net


def mlp_classify(net: Mlp, x) -> str:
    p = float(net.predict(np.asarray(x, dtype=float))[0, 0])
    return SPAM if p > 0.5 else HAM


def build_vocab(corpus: list[LabeledExample], cap: int | None = None) -> list[str]:
    """Dense-feature vocabulary: tokens ordered by first appearance."""
    vocab = []
    seen = set()
    for ex in corpus:
        for token in ex.features:
            if token not in seen:
                seen.add(token)
                vocab.append(token)
                if cap is not None and len(vocab) >= cap:
                    return vocab
    return vocab


def vectorize(counts: TokenVector, vocab: list[str]) -> np.ndarray:
    return np.array([float(counts.get(t, 0)) for t in vocab])


# -------------------------------------------------------------------- quality

@dataclass
class EvalReport:
    efficiency: float           # recall on the spam class
    accuracy: float
    false_positive_rate: float  # ham classified as spam / total ham


def evaluate(classify, test_set: list[tuple[str, str]]) -> EvalReport:
    """classify(text) -> label; test_set holds (label, text) pairs."""
    tp = fn = fp = tn = 0
    for label, text in test_set:
        predicted = classify(text)
        if label == SPAM:
            if predicted == SPAM:
                tp += 1
            else:
                fn += 1
        else:
            if predicted == SPAM:
                fp += 1
            else:
                tn += 1
    total = tp + fn + fp + tn
    return EvalReport(
        efficiency=tp / (tp + fn) if tp + fn else 0.0,
        accuracy=(tp + tn) / total if total else 0.0,
        false_positive_rate=fp / (fp + tn) if fp + tn else 0.0,
    )


# ------------------------------------------------------------------ moderation

@dataclass
class Verdict:
    status: str                   # active | flagged_spam
    posterior: float | None = None


class SpamFilterService:
    """Holds the active classifier; classification is pure, retraining swaps
    the model atomically. Untrained means fail-open: events stay active."""

    def __init__(self, threshold: float = 0.9, alpha: float = 1.0):
        self.threshold = threshold
        self.alpha = alpha
        self.model: NaiveBayesModel | None = None

    def train(self, corpus: list[tuple[str, str]]):
        """corpus: (label, text) pairs."""
        examples = [LabeledExample(tokenize(text), label) for label, text in corpus]
        self.model = nb_train(examples, alpha=self.alpha)

    def moderate_event(self, e: EventRecord) -> Verdict:
        model = self.model
        if model is None:
            return Verdict(status="active")
        _, posterior = nb_classify(model, e.title + " " + e.description)
        status = "flagged_spam" if posterior >= self.threshold else "active"
        return Verdict(status=status, posterior=posterior)


def load_corpus(path: str) -> list[tuple[str, str]]:
    """One record per line: label<TAB>text, UTF-8."""
    corpus = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            label, sep, text = line.partition("\t")
            if not sep or label not in (SPAM, HAM):
                raise ValueError(f"{path}:{line_no}: expected 'spam|ham<TAB>text'")
            corpus.append((label, text))
    return corpus
