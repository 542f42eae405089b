import json
import math
import os
import pathlib

import pytest

import causalkg

SOURCE = pathlib.Path(os.environ.get("CAUSALKG_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))
FIXTURES = SOURCE / "data" / "fixtures"


def test_text_helpers():
    assert causalkg.clean_text("<b>Masks</b> work! https://t.co/x #covid") == "masks work"
    assert causalkg.preprocess_text("It's <b>fine</b>") == "it is fine"
    ts = causalkg.normalize_timestamp("2020-07-24 23:47:08")
    assert causalkg.format_timestamp(ts) == "2020-07-24 23:47:08"


def test_extraction_and_graph():
    assert causalkg.extract("Lockdown measures led to isolation") == [("lockdown measures", "led to", "isolation")]
    rows = [("lockdown", "caused", "isolation", 1, 200), ("Lockdown", "caused", "Isolation", 2, 100)]
    g = causalkg.build_graph(rows)
    assert (g.node_count, g.edge_count) == (2, 1)
    assert g.occurrences("lockdown", "caused", "isolation") == [(100, 2), (200, 1)]
    assert g == causalkg.build_graph(rows + rows)


def test_metrics():
    assert causalkg.bleu("the cat sat", "the cat sat down") == pytest.approx(math.exp(1 - 4 / 3), abs=1e-12)
    assert causalkg.jaccard("misinformation caused mask", "mask usage misinformation") == 0.5
    enc = causalkg.LocalEncoder(64)
    assert enc.dim == 64 and enc.fingerprint.startswith("local:")
    v = enc.encode("heavy rain")
    assert math.isclose(sum(x * x for x in v), 1.0)
    assert causalkg.cosine_sim([1.0, 1.0], [1.0, 0.0]) == pytest.approx(0.70711, abs=1e-5)
    assert causalkg.encoding_similarity("a b", "a b", enc) == pytest.approx(1.0)


def test_errors_carry_code_and_exit_status():
    with pytest.raises(causalkg.Error) as info:
        causalkg.bleu("", "x")
    assert info.value.code == "EmptyInput"
    assert info.value.exit_code == 5


def test_scores_report():
    report = causalkg.report_from_scores(str(FIXTURES / "table1_scores.csv"))
    assert report["average_improvement_pct"] == pytest.approx(11.86, abs=0.05)


def test_pipeline_round_trip(tmp_path):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps({
        "corpus": {"path": str(FIXTURES / "covid_tweets_1000.csv")},
        "artifact_dir": "art",
        "train": {"epochs": 1},
    }))
    cfg = causalkg.load_config(str(cfg_path), ["walk.walks_per_node=2"])
    assert pathlib.Path(cfg.artifact_dir) == tmp_path / "art"
    summaries = causalkg.run_stage("all", cfg, query="isolation", mode="rag")
    assert [s["stage"] for s in summaries][-1] == "query"
    assert (tmp_path / "art" / "answers.jsonl").exists()
    with pytest.raises(causalkg.Error) as info:
        causalkg.load_config(str(cfg_path), ["walk.p=0"])
    assert info.value.code == "ConfigInvalid"
