import csv
import json
from importlib import resources

import jsonschema
import pytest

from overlapdim.cli import main
from overlapdim.separation import dmn_interval

MAIN = ["--alpha", "0.03", "--beta", "0.05", "--gamma", "0.07"]
THIRDS = ["--p1", ".3333333333", "--p2", ".3333333333", "--p3", ".3333333334"]


def schema(command):
    text = resources.files("overlapdim").joinpath("schemas", f"{command}.json").read_text()
    return json.loads(text)


def run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    doc = json.loads(out) if code == 0 and out else None
    if doc is not None:
        jsonschema.validate(doc, schema(doc["command"]))
    return code, doc, err


def strip_duration(doc):
    doc["metadata"].pop("duration_seconds")
    return doc


def test_dim_measure(capsys):
    code, doc, _ = run(capsys, ["dim-measure", *MAIN, *THIRDS])
    assert code == 0
    assert doc["result"]["entropy"] == pytest.approx(1.0986122886681098, abs=1e-9)
    assert doc["metadata"]["command_line"][0] == "dim-measure"


def test_dim_measure_zero_probability(capsys):
    code, _, err = run(capsys, ["dim-measure", *MAIN, "--p1", "0", "--p2", ".5", "--p3", ".5"])
    assert code == 2 and "probabilities must be strictly positive" in err


def test_dim_measure_hypothesis_warning(capsys):
    code, doc, _ = run(capsys, ["dim-measure", "--alpha", "0.03", "--beta", "0.2", "--gamma", "0.07", *THIRDS])
    assert code == 0 and doc["result"]["warnings"]


def test_dim_measure_invalid_params(capsys):
    code, _, err = run(capsys, ["dim-measure", "--alpha", "0.6", "--beta", "0.5", "--gamma", "0.5", *THIRDS])
    assert code == 2 and err


def test_attractor_orderings(capsys):
    _, s0, _ = run(capsys, ["dim-attractor", *MAIN, "--which", "s0"])
    _, s1, _ = run(capsys, ["dim-attractor", *MAIN, "--which", "s1"])
    _, sh, _ = run(capsys, ["dim-attractor", *MAIN, "--which", "shat", "--n", "60"])
    assert s1["result"]["dimension"] < s0["result"]["dimension"]
    assert abs(sh["result"]["exponent"] - s1["result"]["exponent"]) < 1e-8


def test_attractor_thirds(capsys):
    args = ["dim-attractor", "--alpha", str(1 / 3), "--beta", str(1 / 3), "--gamma", str(1 / 3), "--which", "s0"]
    _, doc, _ = run(capsys, args)
    # float(1/3) sits just below 1/3, so the exact root is 1 - 1e-16
    assert doc["result"]["dimension"] == pytest.approx(1.0, abs=1e-15)


def test_shat_needs_n(capsys):
    with pytest.raises(SystemExit) as e:
        main(["dim-attractor", *MAIN, "--which", "shat"])
    assert e.value.code == 2


def test_check_separation(capsys):
    _, doc, _ = run(capsys, ["check-separation", "--alpha", "0.0081", "--beta", "0.09", "--gamma", "0.07"])
    assert doc["result"]["status"] == "Intersecting" and doc["result"]["witness"] == [1, 2]
    _, doc, _ = run(capsys, ["check-separation", *MAIN, "--emit-certificate"])
    assert doc["result"]["status"] == "Separated"
    cert = doc["result"]["certificate"]
    assert cert and all(c["left"] and c["right"] for c in cert)


def test_check_separation_errors(capsys):
    with pytest.raises(SystemExit) as e:
        main(["check-separation", *MAIN, "--depth", "-1"])
    assert e.value.code == 2
    code, _, _ = run(capsys, ["check-separation", "--alpha", "0.03", "--beta", "0.2", "--gamma", "0.07"])
    assert code == 2


def test_sweep(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, doc, _ = run(capsys, ["sweep", "--beta", "0.09", "--gamma", "0.07", "--alpha-min", "0.02",
                                "--alpha-max", "0.089", "--steps", "5", "--out", str(out)])
    assert code == 0 and doc["result"]["rows"] == 5
    raw = out.read_bytes()
    assert b"\r" not in raw
    rows = list(csv.DictReader(raw.decode().splitlines()))
    assert list(rows[0]) == ["alpha", "s0", "s1", "dim_measure", "phi", "separation_status", "in_dmn_band"]
    alphas = [float(r["alpha"]) for r in rows]
    assert alphas == sorted(alphas)
    assert all(float(r["s1"]) < float(r["s0"]) for r in rows)
    band = dmn_interval(0.09, 0.07, 1, 1)
    for r in rows:
        assert ("(1,1)" in r["in_dmn_band"].split(";")) == band.contains(float(r["alpha"]))
    assert "(1,1)" in rows[-1]["in_dmn_band"]


def test_sweep_two_steps(tmp_path, capsys):
    out = tmp_path / "s.csv"
    run(capsys, ["sweep", "--beta", "0.09", "--gamma", "0.07", "--alpha-min", "0.02",
                 "--alpha-max", "0.05", "--steps", "2", "--out", str(out)])
    assert len(out.read_text().splitlines()) == 3


def test_sweep_errors(tmp_path, capsys):
    base = ["sweep", "--beta", "0.09", "--gamma", "0.07", "--alpha-min", "0.02", "--alpha-max", "0.05", "--steps", "2"]
    code, _, _ = run(capsys, [*base, "--out", str(tmp_path / "missing" / "x.csv")])
    assert code == 3
    wide = [*base[:8], "0.2", *base[9:]]
    code, _, _ = run(capsys, [*wide, "--out", str(tmp_path / "y.csv")])
    assert code == 2


def test_phi_modes(capsys):
    probs = ["--p1", "0.2", "--p2", "0.3", "--p3", "0.5"]
    swapped = ["--p1", "0.3", "--p2", "0.2", "--p3", "0.5"]
    _, a, _ = run(capsys, ["phi", *probs, "--series"])
    _, b, _ = run(capsys, ["phi", *swapped, "--series"])
    assert a["result"]["phi"] < 0 and a["result"]["phi"] == b["result"]["phi"]
    _, o, _ = run(capsys, ["phi", *probs, "--oracle", "--samples", "200000", "--seed", "1"])
    assert abs(o["result"]["estimate"] - a["result"]["phi"]) < 3 * o["result"]["stderr"]


def test_phi_oracle_needs_samples(capsys):
    with pytest.raises(SystemExit) as e:
        main(["phi", "--p1", "0.2", "--p2", "0.3", "--p3", "0.5", "--oracle"])
    assert e.value.code == 2


def test_estimate_insufficient(capsys):
    code, _, err = run(capsys, ["estimate", *MAIN, *THIRDS, "--samples", "20", "--probes", "5"])
    assert code == 4 and "radius=" in err


def test_estimate_verbose_and_repeatable(capsys):
    args = ["estimate", *MAIN, *THIRDS, "--samples", "20000", "--probes", "10", "--radii", "1e-2,1e-3", "--verbose"]
    _, a, _ = run(capsys, args)
    _, b, _ = run(capsys, args)
    assert len(a["result"]["per_probe_slopes"]) == a["result"]["probes_used"]
    assert strip_duration(a) == strip_duration(b)


@pytest.mark.parametrize("radii", ["1e-3,1e-2", "abc", "geom:1e-2:1e-4"])
def test_estimate_bad_radii(capsys, radii):
    with pytest.raises(SystemExit) as e:
        main(["estimate", *MAIN, *THIRDS, "--radii", radii])
    assert e.value.code == 2


def test_threads_env_validation(capsys, monkeypatch):
    monkeypatch.setenv("OVERLAPDIM_THREADS", "-3")
    code, _, _ = run(capsys, ["phi", "--p1", "0.2", "--p2", "0.3", "--p3", "0.5", "--oracle", "--samples", "100"])
    assert code == 2
