from __future__ import annotations

import pytest

from ensemble_logic.formats import (
    ParseError,
    format_value,
    parse_constraints,
    parse_labels,
    parse_predictions,
    read_error_rates,
    read_targets,
    write_constraints,
    write_error_rates,
    write_labels,
    write_predictions,
    write_targets,
)
from ensemble_logic.model import ApproxOutput, Interner, Vocabulary


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_parse_tiny_predictions(sample_data):
    obs = parse_predictions(sample_data / "tiny.predictions")
    assert len(obs) == 48
    assert obs.vocab.domains.names() == ["city", "animal"]
    assert obs.vocab.classifiers.names() == ["cpl", "sel", "ocmc"]
    assert len(obs.vocab.instances) == 8
    assert obs.get(ApproxOutput(0, 0, 0)) == 0.95


def test_parse_predictions_skips_comments_and_blank_lines(tmp_path):
    path = _write(tmp_path, "p.tsv", "# header\n\nx1\tcity\tcpl\t0.92\n   \nx1\tcity\tsel\t1\n")
    obs = parse_predictions(path)
    assert [value for _, value in obs.approx_items()] == [0.92, 1.0]


def test_blank_lines_are_skipped_in_labels_and_constraints(tmp_path):
    vocab = Vocabulary()
    ontology = parse_constraints(_write(tmp_path, "c.tsv", "\n  \t\nME\tcity,animal\n\n"), vocab)
    assert ontology.me_pairs == {(0, 1)}
    labels = parse_labels(_write(tmp_path, "l.tsv", "\nx1\tcity\t1\n \nx1\tanimal\t0\n"), vocab)
    assert sorted(labels.values()) == [0, 1]


def test_line_numbers_count_skipped_lines(tmp_path):
    path = _write(tmp_path, "l.tsv", "# labels\n\n   \nx1\tcity\t2\n")
    with pytest.raises(ParseError) as info:
        parse_labels(path)
    assert info.value.line == 4


@pytest.mark.parametrize(
    "body, line, fragment",
    [
        ("x1\tcity\tcpl\t1.3\n", 1, "outside [0, 1]"),
        ("# c\nx1\tcity\tcpl\tabc\n", 2, "not a decimal"),
        ("x1\tcity\tcpl\n", 1, "expected 4"),
        ("x1\tcity\tcpl\t0.1\nx2\tcity\tcpl\t0.2\nx1\tcity\tcpl\t0.3\n", 3, "first given on line 1"),
        ("x1\tcity\tcpl\tnan\n", 1, "outside [0, 1]"),
    ],
)
def test_parse_predictions_errors_name_the_line(tmp_path, body, line, fragment):
    path = _write(tmp_path, "p.tsv", body)
    with pytest.raises(ParseError) as info:
        parse_predictions(path)
    assert info.value.line == line
    assert fragment in info.value.message
    assert str(info.value).startswith(f"{path}:{line}:")


def test_parse_sample_constraints(sample_data):
    nell7 = parse_constraints(sample_data / "nell7.constraints")
    assert nell7.num_domains == 7
    assert len(nell7.me_pairs) == 21
    assert not nell7.sub_pairs

    vocab = Vocabulary()
    nell11 = parse_constraints(sample_data / "nell11.constraints", vocab)
    assert nell11.num_domains == 11
    assert len(nell11.sub_pairs) == 9
    assert len(nell11.me_pairs) == 11
    animal, vertebrate = vocab.domains.get("animal"), vocab.domains.get("vertebrate")
    assert nell11.subsumes(animal, vertebrate)
    assert nell11.is_exclusive(vocab.domains.get("city"), vocab.domains.get("river"))


def test_constraints_share_the_prediction_vocabulary(tmp_path):
    vocab = Vocabulary()
    parse_constraints(_write(tmp_path, "c.tsv", "ME\tanimal,city\n"), vocab)
    obs = parse_predictions(_write(tmp_path, "p.tsv", "x\tcity\tcpl\t1\n"), vocab)
    assert obs.approx_items()[0][0].domain == 1


@pytest.mark.parametrize(
    "body, fragment",
    [
        ("XOR\ta,b\n", "unknown directive"),
        ("ME\tcity\n", "at least 2 distinct"),
        ("ME\tcity,city\n", "at least 2 distinct"),
        ("ME\tcity,,animal\n", "empty domain name"),
        ("ME\tcity,animal\tlake\n", "one comma-separated"),
        ("SUB\tcity\tcity\n", "cannot subsume itself"),
        ("SUB\tcity\n", "parent and a child"),
        ("SUB\t\tcity\n", "empty domain name"),
    ],
)
def test_parse_constraints_errors(tmp_path, body, fragment):
    with pytest.raises(ParseError) as info:
        parse_constraints(_write(tmp_path, "c.tsv", "# ok\n" + body))
    assert info.value.line == 2
    assert fragment in info.value.message


def test_subsumption_cycle_is_only_a_warning(tmp_path, caplog):
    ontology = parse_constraints(_write(tmp_path, "c.tsv", "SUB\ta\tb\nSUB\tb\ta\n"))
    assert len(ontology.sub_pairs) == 2
    assert "cycle" in caplog.text


def test_parse_labels(sample_data, tmp_path):
    truth = parse_labels(sample_data / "tiny.labels")
    assert len(truth) == 16
    assert sum(truth.values()) == 8

    with pytest.raises(ParseError, match="must be 0 or 1"):
        parse_labels(_write(tmp_path, "l.tsv", "x\tcity\t0.5\n"))
    with pytest.raises(ParseError, match="duplicate label"):
        parse_labels(_write(tmp_path, "l.tsv", "x\tcity\t1\nx\tcity\t1\n"))


def test_missing_file_raises_os_error(tmp_path):
    with pytest.raises(OSError):
        parse_predictions(tmp_path / "absent.tsv")


def test_format_value():
    assert format_value(0.92) == "0.92"
    assert format_value(1.0) == "1"
    assert format_value(0.0) == "0"
    assert format_value(0.1234567) == "0.123457"
    assert format_value(1e-9) == "0"


def test_predictions_and_labels_roundtrip(sample_data, tmp_path):
    obs = parse_predictions(sample_data / "tiny.predictions")
    truth = parse_labels(sample_data / "tiny.labels", obs.vocab)
    write_predictions(obs, tmp_path / "p.tsv")
    write_labels(truth, tmp_path / "l.tsv")

    vocab = Vocabulary()
    again = parse_predictions(tmp_path / "p.tsv", vocab)
    labels = parse_labels(tmp_path / "l.tsv", vocab)
    named = {
        (obs.vocab.instances.lookup(p.instance), obs.vocab.domains.lookup(p.domain), obs.vocab.classifiers.lookup(p.classifier)): v
        for p, v in obs.approx_items()
    }
    renamed = {
        (vocab.instances.lookup(p.instance), vocab.domains.lookup(p.domain), vocab.classifiers.lookup(p.classifier)): v
        for p, v in again.approx_items()
    }
    assert named == renamed
    assert {(vocab.instances.lookup(i), vocab.domains.lookup(d)): y for (d, i), y in labels.items()} == {
        (obs.vocab.instances.lookup(i), obs.vocab.domains.lookup(d)): y for (d, i), y in truth.items()
    }


def test_constraints_roundtrip(sample_data, tmp_path):
    vocab = Vocabulary()
    ontology = parse_constraints(sample_data / "nell11.constraints", vocab)
    write_constraints(ontology, vocab, tmp_path / "c.tsv")
    again_vocab = Vocabulary()
    again = parse_constraints(tmp_path / "c.tsv", again_vocab)

    def named(onto, names):
        me = {frozenset((names.domains.lookup(a), names.domains.lookup(b))) for a, b in onto.me_pairs}
        sub = {(names.domains.lookup(p), names.domains.lookup(c)) for p, c in onto.sub_pairs}
        return me, sub

    assert named(ontology, vocab) == named(again, again_vocab)


def test_estimate_files_roundtrip(tmp_path):
    vocab = Vocabulary(Interner(["city", "animal"]), Interner(["cpl", "sel"]), Interner(["x1", "x2"]))
    rates = {(0, 0): 0.125, (0, 1): 0.3333333, (1, 0): 0.0}
    soft = {(0, 0): 0.98765432, (1, 1): 0.25}
    hard = {(0, 0): 1, (1, 1): 0}
    write_error_rates(rates, vocab, tmp_path / "e.tsv")
    write_targets(soft, hard, vocab, tmp_path / "t.tsv")

    text = (tmp_path / "e.tsv").read_text(encoding="utf-8")
    assert text.splitlines()[0] == "# domain\tclassifier\testimate"
    assert "city\tsel\t0.333333" in text

    back = read_error_rates(tmp_path / "e.tsv", vocab)
    assert back.keys() == rates.keys()
    for key, value in rates.items():
        assert back[key] == pytest.approx(value, abs=1e-6)
    soft_back, hard_back = read_targets(tmp_path / "t.tsv", vocab)
    assert hard_back == hard
    assert soft_back[(0, 0)] == pytest.approx(0.987654, abs=1e-12)


def test_empty_label_file_is_valid(tmp_path):
    truth = parse_labels(_write(tmp_path, "l.tsv", ""))
    assert len(truth) == 0
