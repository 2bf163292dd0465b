import json
import logging
import math

import numpy as np
import pytest

from rppkit import cli
from rppkit.estimation import FitReport
from rppkit.io import DataError, input_digest, read_dataset, read_report, read_truth, write_dataset
from rppkit.model import EventSequence, ModelConfig, PriorParams
from rppkit.prediction import predict_bayes


def run(*argv):
    try:
        return cli.main([str(a) for a in argv])
    except SystemExit as exc:
        return exc.code


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    data = d / "data.jsonl"
    assert run("simulate", "--n-items", 300, "--window-end", 12, "--seed", 5, "--output", data) == 0
    return d, data


def test_dataset_round_trip(tmp_path):
    seqs = [EventSequence("a", [0.1, 0.5, 0.5, 2.0], 3.0), EventSequence("e", [], 3.0),
            EventSequence("w", [1.0], 1.5)]
    p = tmp_path / "d.jsonl"
    write_dataset(str(p), seqs, 3.0, "day", {"k": 1})
    ds = read_dataset(str(p))
    assert ds.window_end == 3.0 and ds.time_unit == "day" and ds.meta == {"k": 1}
    assert ds.ids == ["a", "e", "w"]
    for a, b in zip(seqs, ds.sequences):
        assert tuple(a.arrivals) == tuple(b.arrivals) and a.window_end == b.window_end


def _lines(tmp_path, *records):
    p = tmp_path / "bad.jsonl"
    head = {"record": "manifest", "schema": "rppkit.dataset/1", "window_end": 5.0}
    p.write_text("\n".join(json.dumps(r) if not isinstance(r, str) else r
                           for r in (head, *records)) + "\n")
    return str(p)


@pytest.mark.parametrize("records, needle", [
    (['{"item_id": "a", "event_time": '], ":2: invalid JSON"),
    ([{"item_id": "a", "event_time": 1.0}, {"item_id": "a", "event_time": 9.0}], ":3: event_time"),
    ([{"item_id": "", "event_time": 1.0}], ":2: item_id"),
    ([{"item_id": "a"}], ":2: missing event_time"),
    ([{"item_id": "a", "event_time": "x"}], ":2: event_time must be a number"),
])
def test_parse_errors_carry_line_numbers(tmp_path, records, needle):
    with pytest.raises(DataError, match=needle):
        read_dataset(_lines(tmp_path, *records))


def test_unknown_fields_warn_once(tmp_path, caplog):
    path = _lines(tmp_path, {"item_id": "a", "event_time": 1.0, "color": 1},
                  {"item_id": "a", "event_time": 2.0, "color": 2})
    with caplog.at_level(logging.WARNING):
        ds = read_dataset(path)
    assert ds.sequences[0].n == 2
    assert sum("color" in r.message for r in caplog.records) == 1


def test_missing_manifest(tmp_path):
    p = tmp_path / "x.jsonl"
    p.write_text('{"item_id": "a", "event_time": 1.0}\n')
    with pytest.raises(DataError, match="manifest"):
        read_dataset(str(p))


def test_simulate_outputs(sim):
    d, data = sim
    ds = read_dataset(str(data))
    assert len(ds) == 300 and ds.meta["seed"] == 5
    truth = read_truth(str(d / "data.truth.json"))
    lam = np.array([p.fitness for p in truth["items"].values()])
    prior = PriorParams(4.0, 4.0)
    assert abs(lam.mean() - prior.mean) < 3 * math.sqrt(prior.variance / lam.size)


def test_simulate_is_reproducible(tmp_path, sim):
    _, data = sim
    again = tmp_path / "again.jsonl"
    assert run("simulate", "--n-items", 300, "--window-end", 12, "--seed", 5, "--output", again) == 0
    assert again.read_bytes() == data.read_bytes()


def test_simulate_empty_corpus(tmp_path):
    out = tmp_path / "z.jsonl"
    assert run("simulate", "--n-items", 0, "--window-end", 5, "--seed", 1, "--output", out) == 0
    assert len(read_dataset(str(out))) == 0


def test_fit_predict_pipeline(tmp_path, sim):
    _, data = sim
    fit = tmp_path / "fit.json"
    pred = tmp_path / "pred.json"
    assert run("fit", "--dataset", data, "--train-window", 8, "--seed", 1, "--output", fit) == 0
    assert run("predict", "--dataset", data, "--fit", fit, "--horizons", "8,10,12",
               "--seed", 1, "--output", pred) == 0
    doc = read_report(str(pred), "predict")
    ds = read_dataset(str(data))
    rep = FitReport.from_dict(read_report(str(fit), "fit")["fit"])
    for s in ds.sequences[:25]:
        train = s.truncate(8.0)
        rows = doc["items"][s.item_id]["forecasts"]
        assert rows[0]["point"] == train.n and rows[0]["variance"] == 0.0
        f = predict_bayes(train, rep.per_item[s.item_id].params, None, rep.prior,
                          ModelConfig(m=30), 12.0)
        assert rows[2]["point"] == pytest.approx(f.point, rel=1e-9)
    text = pred.read_text()
    assert "NaN" not in text and "Infinity" not in text
    assert doc["inputs"]["fit.json"] == input_digest(str(fit))


def test_mle_regime_and_benchmark(tmp_path, sim):
    _, data = sim
    fit = tmp_path / "mle.json"
    assert run("fit", "--dataset", data, "--regime", "mle", "--seed", 1, "--output", fit) == 0
    assert read_report(str(fit), "fit")["fit"]["regime"] == "mle"
    bench = tmp_path / "bench.json"
    assert run("benchmark", "--dataset", data, "--train-window", 8, "--horizons", "1,2,3,4",
               "--seed", 1, "--output", bench) == 0
    doc = read_report(str(bench), "benchmark")
    assert doc["config"]["epsilon"] == 0.1
    assert set(doc["benchmark"]["models"]) == {"rpp-prior", "rpp-mle", "ar", "sh"}


def test_predict_reconciliation(tmp_path, sim):
    _, data = sim
    fit = tmp_path / "fit.json"
    assert run("fit", "--dataset", data, "--seed", 1, "--output", fit) == 0
    ds = read_dataset(str(data))
    other = tmp_path / "other.jsonl"
    write_dataset(str(other), ds.sequences[:-1], ds.window_end)
    assert run("predict", "--dataset", other, "--fit", fit, "--horizons", 14,
               "--seed", 1, "--output", tmp_path / "p.json") == 2
    # a horizon before the window end is a usage error
    assert run("predict", "--dataset", data, "--fit", fit, "--horizons", 3,
               "--seed", 1, "--output", tmp_path / "p.json") == 1


def test_exit_codes(tmp_path):
    out = tmp_path / "o.json"
    assert run("fit") == 1
    assert run("bogus") == 1
    assert run("fit", "--dataset", tmp_path / "nope.jsonl", "--seed", 1, "--output", out) == 2
    empty = tmp_path / "e.jsonl"
    write_dataset(str(empty), [EventSequence("e", [], 2.0)], 2.0)
    assert run("fit", "--dataset", empty, "--seed", 1, "--output", out) == 2
    assert run("benchmark", "--dataset", empty, "--train-window", 1, "--models", "xx",
               "--seed", 1, "--output", out) == 1


def test_seed_is_recorded_when_omitted(tmp_path):
    out = tmp_path / "s.jsonl"
    assert run("simulate", "--n-items", 2, "--window-end", 3, "--output", out) == 0
    seed = read_dataset(str(out)).meta["seed"]
    assert isinstance(seed, int) and 0 <= seed < 2 ** 63
