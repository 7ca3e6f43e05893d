import json
import random

import pytest

from notesum.cli import (
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_OK,
    PipelineConfig,
    main,
    parse_config,
)
from notesum.errors import ConfigurationError

from conftest import I2B2_TERMS, UMLS_TERMS, make_note_text, write_lines, write_note_file


# ---------------------------------------------------------------------------
# configuration


def test_defaults_carry_the_published_constants():
    cfg = parse_config()
    assert cfg.p_umls == 0.7
    assert cfg.p_i2b2 == 0.3
    assert cfg.p_sentence == 0.15
    assert cfg.keep_fraction == 0.15
    assert cfg.max_output_tokens == 40
    assert cfg.sentinel_format == "<extra_id_{i}>"


def test_flags_override_config_file(tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"seed": 5, "p_sentence": 0.2}), encoding="utf-8")
    cfg = parse_config({"p_sentence": 0.1}, str(config))
    assert cfg.seed == 5          # from file
    assert cfg.p_sentence == 0.1  # flag wins


def test_all_validation_errors_reported_at_once(tmp_path):
    with pytest.raises(ConfigurationError) as exc:
        parse_config({"p_umls": 1.1, "p_i2b2": -0.1, "keep_fraction": 0.0})
    message = str(exc.value)
    assert "p_umls" in message
    assert "p_i2b2" in message
    assert "keep_fraction" in message


def test_unknown_config_key_is_an_error(tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"probability": 0.7}), encoding="utf-8")
    with pytest.raises(ConfigurationError) as exc:
        parse_config(None, str(config))
    assert "probability" in str(exc.value)


def test_missing_required_path_is_reported():
    with pytest.raises(ConfigurationError) as exc:
        parse_config({}, None, required_paths=("umls_dict",))
    assert "umls_dict" in str(exc.value)


def test_pipeline_config_builds_module_configs():
    cfg = PipelineConfig()
    assert cfg.mask_config().p_umls == 0.7
    assert cfg.generation_config().max_output_tokens == 40
    assert cfg.filter_config().keep_fraction == 0.15
    assert cfg.composition_mode().value == "aso"


# ---------------------------------------------------------------------------
# fixture corpus on disk


@pytest.fixture()
def workspace(tmp_path):
    rng = random.Random(404)
    notes = [
        {"doc_id": f"n{i:03d}", "text": make_note_text(rng, n_sentences=4)}
        for i in range(25)
    ]
    section_notes = []
    for i in range(8):
        term = UMLS_TERMS[i % len(UMLS_TERMS)]
        section_notes.append(
            {
                "doc_id": f"s{i:03d}",
                "assessment": f"pt with {term} overnight . plan continue monitoring .",
                "subjective": "feels tired",
                "objective": "vitals stable",
                "summary": term,
            }
        )
    paths = {
        "notes": write_note_file(tmp_path / "notes.jsonl", notes),
        "sections": write_note_file(tmp_path / "sections.jsonl", section_notes),
        "umls": write_lines(tmp_path / "umls.txt", UMLS_TERMS),
        "i2b2": write_lines(tmp_path / "i2b2.txt", I2B2_TERMS),
        "dir": tmp_path,
    }
    return paths


def test_build_pretrain_writes_corpus_and_stats(workspace):
    out = workspace["dir"] / "corpus.jsonl"
    stats = workspace["dir"] / "stats.json"
    code = main(
        [
            "build-pretrain",
            "--input", str(workspace["notes"]),
            "--umls-dict", str(workspace["umls"]),
            "--i2b2-source", str(workspace["i2b2"]),
            "--seed", "3",
            "--out", str(out),
            "--stats", str(stats),
        ]
    )
    assert code == EXIT_OK
    assert len(out.read_text().splitlines()) == 25
    report = json.loads(stats.read_text())
    assert report["total_rows"] == 25
    assert report["sentences_total"] == 100


def test_stats_subcommand_prints_the_report(workspace, capsys):
    code = main(
        [
            "stats",
            "--input", str(workspace["notes"]),
            "--umls-dict", str(workspace["umls"]),
            "--i2b2-source", str(workspace["i2b2"]),
        ]
    )
    assert code == EXIT_OK
    printed = capsys.readouterr().out
    assert "rows" in printed and "no entities" in printed


def test_standoff_i2b2_source_is_autodetected(workspace):
    standoff = workspace["dir"] / "standoff.tsv"
    standoff.write_text("n000\t0\t0\t1\tproblem\n", encoding="utf-8")
    out = workspace["dir"] / "corpus2.jsonl"
    code = main(
        [
            "build-pretrain",
            "--input", str(workspace["notes"]),
            "--umls-dict", str(workspace["umls"]),
            "--i2b2-source", str(standoff),
            "--out", str(out),
        ]
    )
    assert code == EXIT_OK


def test_invalid_probability_flag_exits_config(workspace):
    code = main(
        [
            "build-pretrain",
            "--input", str(workspace["notes"]),
            "--umls-dict", str(workspace["umls"]),
            "--i2b2-source", str(workspace["i2b2"]),
            "--p-umls", "1.1",
            "--out", str(workspace["dir"] / "x.jsonl"),
        ]
    )
    assert code == EXIT_CONFIG


def test_missing_dictionary_path_exits_config(workspace):
    code = main(
        [
            "build-pretrain",
            "--input", str(workspace["notes"]),
            "--umls-dict", str(workspace["dir"] / "missing.txt"),
            "--i2b2-source", str(workspace["i2b2"]),
            "--out", str(workspace["dir"] / "x.jsonl"),
        ]
    )
    assert code == EXIT_CONFIG


def test_unknown_subcommand_prints_usage_and_fails(capsys):
    code = main(["frobnicate"])
    assert code != EXIT_OK
    assert "usage" in capsys.readouterr().err.lower()


def test_evaluate_hand_value(tmp_path, capsys):
    pred = write_lines(tmp_path / "pred.txt", ["the cat sat"])
    ref = write_lines(tmp_path / "ref.txt", ["the cat ate"])
    code = main(["evaluate", "--pred", str(pred), "--ref", str(ref)])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "66.67" in out and "50.00" in out


def test_evaluate_mismatched_files_is_a_data_error(tmp_path):
    pred = write_lines(tmp_path / "pred.txt", ["one", "two"])
    ref = write_lines(tmp_path / "ref.txt", ["one"])
    code = main(["evaluate", "--pred", str(pred), "--ref", str(ref)])
    assert code == EXIT_DATA


def run_chain(workspace, tag, seed="11"):
    d = workspace["dir"]
    corpus = d / f"corpus-{tag}.jsonl"
    pairs = d / f"pairs-{tag}.jsonl"
    kept = d / f"kept-{tag}.jsonl"
    train = d / f"train-{tag}.jsonl"
    scores = d / f"scores-{tag}.json"
    steps = [
        ["build-pretrain", "--input", str(workspace["notes"]),
         "--umls-dict", str(workspace["umls"]), "--i2b2-source", str(workspace["i2b2"]),
         "--seed", seed, "--out", str(corpus), "--stats", str(d / f"stats-{tag}.json")],
        ["augment", "--train", str(workspace["sections"]), "--seed", seed,
         "--max-out", "12", "--out", str(pairs)],
        ["filter", "--in", str(pairs), "--keep", "0.5", "--out", str(kept)],
        ["assemble", "--notes", str(workspace["sections"]), "--augmented", str(kept),
         "--mode", "aso", "--target-size", "20", "--out", str(train)],
        ["evaluate", "--pred", str(train), "--ref", str(train), "--out", str(scores)],
    ]
    for argv in steps:
        assert main(argv) == EXIT_OK, argv
    return [p.read_bytes() for p in (corpus, pairs, kept, train, scores)]


def test_full_chain_runs_and_is_deterministic(workspace):
    first = run_chain(workspace, "a")
    second = run_chain(workspace, "b")
    assert first == second
    # the chain actually produced augmentation candidates
    assert len(first[1].splitlines()) > 0


def test_worker_flag_does_not_change_output(workspace):
    d = workspace["dir"]
    outs = []
    for workers, tag in (("1", "w1"), ("4", "w4")):
        out = d / f"corpus-{tag}.jsonl"
        code = main(
            [
                "build-pretrain",
                "--input", str(workspace["notes"]),
                "--umls-dict", str(workspace["umls"]),
                "--i2b2-source", str(workspace["i2b2"]),
                "--seed", "2", "--workers", workers,
                "--out", str(out),
            ]
        )
        assert code == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
