"""Tab-separated file formats for predictions, constraints, labels and estimates.

Every reader streams its file line by line, skips blank lines and lines
starting with ``#``, and rejects anything else it cannot fully interpret.
"""
from __future__ import annotations

import math
import pathlib
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

from .model import (
    ApproxOutput,
    EnsembleLogicError,
    ObservationSet,
    Ontology,
    OntologyError,
    TruthSet,
    Vocabulary,
    build_ontology,
)


class ParseError(EnsembleLogicError):
    def __init__(self, path: pathlib.Path | str, line: int, message: str) -> None:
        self.path = str(path)
        self.line = line
        self.message = message
        super().__init__(f"{path}:{line}: {message}")


def format_value(value: float) -> str:
    """Shortest fixed-point rendering with at most 6 decimals (``0.92``, ``1``)."""
    text = f"{value:.6f}".rstrip("0").rstrip(".")
    return "0" if text in ("", "-0") else text


def _records(path: pathlib.Path, fields: int) -> Iterator[Tuple[int, List[str]]]:
    """Yield (line number, fields) for every data line.

    Lines starting with `#` and lines holding only whitespace are skipped in
    every input format; line numbers still count them.
    """
    with pathlib.Path(path).open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if fields and len(parts) != fields:
                raise ParseError(path, lineno, f"expected {fields} tab-separated fields, got {len(parts)}")
            yield lineno, parts


def _unit_value(path: pathlib.Path, lineno: int, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(path, lineno, f"value {text!r} is not a decimal number") from None
    if math.isnan(value) or not 0.0 <= value <= 1.0:
        raise ParseError(path, lineno, f"value {text} outside [0, 1]")
    return value


def parse_predictions(path: pathlib.Path | str, vocab: Optional[Vocabulary] = None) -> ObservationSet:
    """Read ``instance<TAB>domain<TAB>classifier<TAB>value`` records."""
    path = pathlib.Path(path)
    obs = ObservationSet(vocab=vocab or Vocabulary())
    first_seen: Dict[ApproxOutput, int] = {}
    for lineno, (instance, domain, classifier, text) in _records(path, 4):
        value = _unit_value(path, lineno, text)
        predicate = ApproxOutput(
            obs.vocab.domains.intern(domain),
            obs.vocab.classifiers.intern(classifier),
            obs.vocab.instances.intern(instance),
        )
        if predicate in first_seen:
            raise ParseError(
                path,
                lineno,
                f"duplicate prediction for ({instance}, {domain}, {classifier}); first given on line {first_seen[predicate]}",
            )
        first_seen[predicate] = lineno
        obs.set(predicate, value)
    return obs


def parse_constraints(path: pathlib.Path | str, vocab: Optional[Vocabulary] = None) -> Ontology:
    """Read ``ME<TAB>d1,d2,…`` and ``SUB<TAB>parent<TAB>child`` directives."""
    path = pathlib.Path(path)
    vocab = vocab or Vocabulary()
    me_sets: List[List[int]] = []
    sub_pairs: List[Tuple[int, int]] = []
    for lineno, parts in _records(path, 0):
        directive = parts[0]
        if directive == "ME":
            if len(parts) != 2:
                raise ParseError(path, lineno, "ME expects one comma-separated domain list")
            names = [name.strip() for name in parts[1].split(",")]
            if any(not name for name in names):
                raise ParseError(path, lineno, "ME set contains an empty domain name")
            if len(set(names)) < 2:
                raise ParseError(path, lineno, f"ME set needs at least 2 distinct domains, got {parts[1]!r}")
            me_sets.append([vocab.domains.intern(name) for name in names])
        elif directive == "SUB":
            if len(parts) != 3:
                raise ParseError(path, lineno, "SUB expects a parent and a child domain")
            parent, child = parts[1].strip(), parts[2].strip()
            if not parent or not child:
                raise ParseError(path, lineno, "SUB has an empty domain name")
            if parent == child:
                raise ParseError(path, lineno, f"domain {parent!r} cannot subsume itself")
            sub_pairs.append((vocab.domains.intern(parent), vocab.domains.intern(child)))
        else:
            raise ParseError(path, lineno, f"unknown directive {directive!r} (expected ME or SUB)")
    try:
        return build_ontology(len(vocab.domains), me_sets, sub_pairs)
    except OntologyError as exc:
        raise ParseError(path, 0, str(exc)) from exc


def parse_labels(path: pathlib.Path | str, vocab: Optional[Vocabulary] = None) -> TruthSet:
    """Read ``instance<TAB>domain<TAB>{0|1}`` records."""
    path = pathlib.Path(path)
    truth = TruthSet(vocab=vocab or Vocabulary())
    first_seen: Dict[Tuple[int, int], int] = {}
    for lineno, (instance, domain, text) in _records(path, 3):
        if text not in ("0", "1"):
            raise ParseError(path, lineno, f"label {text!r} must be 0 or 1")
        key = (truth.vocab.domains.intern(domain), truth.vocab.instances.intern(instance))
        if key in first_seen:
            raise ParseError(path, lineno, f"duplicate label for ({instance}, {domain}); first given on line {first_seen[key]}")
        first_seen[key] = lineno
        truth[key] = int(text)
    return truth


def write_predictions(obs: ObservationSet, path: pathlib.Path | str) -> pathlib.Path:
    path = pathlib.Path(path)
    names = obs.vocab
    rows = sorted(obs.approx_items(), key=lambda item: (item[0].instance, item[0].domain, item[0].classifier))
    with path.open("w", encoding="utf-8") as fh:
        for predicate, value in rows:
            fh.write(
                f"{names.instances.lookup(predicate.instance)}\t{names.domains.lookup(predicate.domain)}\t"
                f"{names.classifiers.lookup(predicate.classifier)}\t{format_value(value)}\n"
            )
    return path


def write_constraints(ontology: Ontology, vocab: Vocabulary, path: pathlib.Path | str) -> pathlib.Path:
    """Write ME constraints pairwise and SUB constraints one per line."""
    path = pathlib.Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for a, b in sorted(ontology.me_pairs):
            fh.write(f"ME\t{vocab.domains.lookup(a)},{vocab.domains.lookup(b)}\n")
        for parent, child in sorted(ontology.sub_pairs):
            fh.write(f"SUB\t{vocab.domains.lookup(parent)}\t{vocab.domains.lookup(child)}\n")
    return path


def write_labels(truth: TruthSet, path: pathlib.Path | str) -> pathlib.Path:
    path = pathlib.Path(path)
    names = truth.vocab
    with path.open("w", encoding="utf-8") as fh:
        for (domain, instance), label in sorted(truth.items(), key=lambda item: (item[0][1], item[0][0])):
            fh.write(f"{names.instances.lookup(instance)}\t{names.domains.lookup(domain)}\t{label}\n")
    return path


def write_error_rates(error_rates: Mapping[Tuple[int, int], float], vocab: Vocabulary, path: pathlib.Path | str) -> pathlib.Path:
    path = pathlib.Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("# domain\tclassifier\testimate\n")
        for (domain, classifier), value in sorted(error_rates.items()):
            fh.write(f"{vocab.domains.lookup(domain)}\t{vocab.classifiers.lookup(classifier)}\t{value:.6f}\n")
    return path


def write_targets(
    target_soft: Mapping[Tuple[int, int], float],
    target_hard: Mapping[Tuple[int, int], int],
    vocab: Vocabulary,
    path: pathlib.Path | str,
) -> pathlib.Path:
    path = pathlib.Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("# instance\tdomain\tsoft\thard\n")
        for (domain, instance), soft in sorted(target_soft.items(), key=lambda item: (item[0][1], item[0][0])):
            fh.write(
                f"{vocab.instances.lookup(instance)}\t{vocab.domains.lookup(domain)}\t{soft:.6f}\t{target_hard[(domain, instance)]}\n"
            )
    return path


def read_error_rates(path: pathlib.Path | str, vocab: Vocabulary) -> Dict[Tuple[int, int], float]:
    path = pathlib.Path(path)
    rates: Dict[Tuple[int, int], float] = {}
    for lineno, (domain, classifier, text) in _records(path, 3):
        rates[(vocab.domains.intern(domain), vocab.classifiers.intern(classifier))] = _unit_value(path, lineno, text)
    return rates


def read_targets(path: pathlib.Path | str, vocab: Vocabulary) -> Tuple[Dict[Tuple[int, int], float], Dict[Tuple[int, int], int]]:
    path = pathlib.Path(path)
    soft: Dict[Tuple[int, int], float] = {}
    hard: Dict[Tuple[int, int], int] = {}
    for lineno, (instance, domain, value, label) in _records(path, 4):
        if label not in ("0", "1"):
            raise ParseError(path, lineno, f"hard label {label!r} must be 0 or 1")
        key = (vocab.domains.intern(domain), vocab.instances.intern(instance))
        soft[key] = _unit_value(path, lineno, value)
        hard[key] = int(label)
    return soft, hard
