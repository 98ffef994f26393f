import json

import pytest

from carnot_residue import cli


@pytest.fixture
def env(tmp_path, monkeypatch):
    monkeypatch.setenv("CARNOT_CACHE", str(tmp_path / "cache"))
    monkeypatch.chdir(tmp_path)
    return tmp_path


def run(*argv):
    return cli.main(list(argv))


def artifacts(out, verb):
    return sorted(out.glob(f"{verb}-*.json"))


FAST = {
    "algebra-check": ["algebra=engel", "samples=50"],
    "local-trace": ["m=-3.5"],
    "cocycle-residue": [],
    "pole-residue": [],
    "weyl": ["d=2"],
    "dixmier": ["sequence=harmonic", "N_target=100000", "tol=1e-3"],
    "zeta-residue": ["d=2"],
    "connes-check": ["d=2", "N_target=100000"],
    "heisenberg-validate": ["count=20", "resolution=32"],
}


@pytest.mark.parametrize("verb", sorted(FAST))
def test_verbs_pass(env, verb, capsys):
    out = env / "out"
    assert run(verb, f"out_dir={out}", *FAST[verb]) == 0
    assert f"{verb}: PASS" in capsys.readouterr().out
    (path,) = artifacts(out, verb)
    record = json.loads(path.read_text())
    assert record["verb"] == verb and record["passed"] and record["exit_code"] == 0
    assert path.name == f"{verb}-{record['config_hash']}.json"


def test_connes_json_schema(env):
    out = env / "out"
    assert run("connes-check", f"out_dir={out}", "d=2", "N_target=100000") == 0
    res = json.loads(artifacts(out, "connes-check")[0].read_text())["results"]
    assert set(res) >= {"A", "B", "rel_discrepancy", "N_target", "grid"}
    assert res["rel_discrepancy"] < 0.02


def test_cocycle_residue_constancy(env):
    out = env / "out"
    assert run("cocycle-residue", f"out_dir={out}", "lambdas=2,4,10", "test_function=gauss_bump") == 0
    res = json.loads(artifacts(out, "cocycle-residue")[0].read_text())["results"]
    assert res["deviation"] < 1e-6


def test_usage_errors(env, capsys):
    assert run("frobnicate") == 2
    assert "verbs:" in capsys.readouterr().err
    assert run("weyl", "bogus=1") == 2
    assert run("weyl", "d=9") == 2
    assert run("weyl", "d=two") == 2
    assert run("weyl", "N_target=1000") == 2  # key does not apply to this verb
    assert run("weyl", "d") == 2
    assert run("weyl", "-c", str(env / "missing.cfg")) == 2
    assert run("--help") == 0


def test_tolerance_failure_exit_code(env):
    assert run("dixmier", f"out_dir={env}", "sequence=harmonic", "N_target=100000", "expect=2") == 1
    record = json.loads(artifacts(env, "dixmier")[0].read_text())
    assert not record["passed"] and record["exit_code"] == 1


def test_nonconvergence_exit_code(env):
    assert run("pole-residue", f"out_dir={env}", "tol=1e-15") == 3


def test_config_file_and_hash(env):
    cfg = env / "h.cfg"
    cfg.write_text("# shared settings\nmodel = torus\nd = 2\nN_target = 100000  # dixmier only\n")
    out = env / "out"
    assert run("weyl", "-c", str(cfg), f"out_dir={out}") == 0
    assert run("zeta-residue", "-c", str(cfg), f"out_dir={out}") == 0
    h1 = json.loads(artifacts(out, "weyl")[0].read_text())["config_hash"]
    h2 = json.loads(artifacts(out, "zeta-residue")[0].read_text())["config_hash"]
    assert h1 == h2
    # settings may follow the config flag
    assert run("dixmier", "-c", str(cfg), f"out_dir={out}", "N_target=100000") == 0
    assert run("report", f"out_dir={out}") == 0
    summary = json.loads((out / f"report-{h1}.json").read_text())
    assert summary["all_passed"] and set(summary["verbs"]) == {"weyl", "zeta-residue", "dixmier"}


def test_report_refuses_mixed_hashes(env):
    out = env / "out"
    assert run("weyl", f"out_dir={out}", "d=2") == 0
    assert run("weyl", f"out_dir={out}", "d=3") == 0
    assert run("report", f"out_dir={out}") == 2
    h = json.loads(sorted(artifacts(out, "weyl"))[0].read_text())["config_hash"]
    assert run("report", f"out_dir={out}", f"hash={h}") == 0
    assert run("report", f"out_dir={out}", "hash=000000000000") == 2
    assert run("report", f"out_dir={env / 'empty'}") == 2


def test_csv_bit_identical(env):
    a, b = env / "a", env / "b"
    for out in (a, b):
        assert run("zeta-residue", f"out_dir={out}", "d=2") == 0
    (ca,), (cb,) = sorted(a.glob("*.csv")), sorted(b.glob("*.csv"))
    assert ca.name == cb.name
    assert ca.read_bytes() == cb.read_bytes()
    text = ca.read_text().splitlines()
    assert text[0] == "# verb=zeta-residue"
    assert text[2] == "epsilon,zeta_value,eps_times_zeta,extrapolant"


def test_cache_directory(env):
    assert run("weyl", f"out_dir={env / 'out'}", "d=3") == 0
    assert list((env / "cache").glob("*.bin"))
    own = env / "own"
    assert run("weyl", f"out_dir={env / 'out'}", "d=3", f"cache_dir={own}") == 0
    assert list(own.glob("*.bin.json"))
