import json

import pytest

from boundecay import cli

FAST = """
[campaign]
name = "fast"
theorem = "Theorem 4"
checks = ["thm4", "thm6", "hi"]
seed = 3

[domain]
generator = "rectangle"
params = [1.0, 1.0]
resolution = 0.1

[sweep]
n_max = 3
vectors = 2
"""


def write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_list_presets(capsys):
    assert cli.main(["list-presets"]) == 0
    out = capsys.readouterr().out
    for name in ("example5", "interval-shrink", "corollary8", "halfline-heat", "checkerboard-alpha2"):
        assert name in out
    names = cli.preset_names()
    assert len(names) >= 8
    for name in names:
        camp = cli.load_preset(name)
        assert any(w in camp.theorem for w in ("Theorem", "Corollary", "Example", "Lemma", "Hardy", "Weyl"))


def test_run_config_outputs(tmp_path, capsys):
    cfg = write(tmp_path, FAST)
    out = tmp_path / "out"
    assert cli.main(["--out-dir", str(out), "run", cfg]) == 0
    assert "all checks pass" in capsys.readouterr().out
    doc = json.loads((out / "fast.json").read_text())
    assert doc["schema_version"] == cli.SCHEMA_VERSION
    assert doc["seed"] == 3
    header = (out / "fast.csv").read_text().splitlines()[0]
    assert header.split(",")[:3] == ["check", "name", "domain"]
    assert (out / "fast.txt").exists()


def test_run_is_byte_identical(tmp_path):
    cfg = write(tmp_path, FAST)
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert cli.main(["--out-dir", str(a), "run", cfg]) == 0
    assert cli.main(["--out-dir", str(b), "run", cfg]) == 0
    assert cli.main(["--out-dir", str(c), "--jobs", "2", "run", cfg]) == 0
    for name in ("fast.csv", "fast.json", "fast.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes() == (c / name).read_bytes()


def test_seed_flag_changes_vectors(tmp_path):
    cfg = write(tmp_path, FAST)
    cli.main(["--out-dir", str(tmp_path / "a"), "run", cfg])
    cli.main(["--out-dir", str(tmp_path / "b"), "--seed", "99", "run", cfg])
    assert (tmp_path / "a" / "fast.csv").read_bytes() != (tmp_path / "b" / "fast.csv").read_bytes()


@pytest.mark.parametrize(
    "text, message",
    [
        (FAST.replace('checks = ["thm4", "thm6", "hi"]', "checks = []"), "no checks"),
        (FAST + "\n[extra]\nx = 1\n", "unknown section"),
        (FAST.replace("n_max = 3", "n_max = 3\nbogus = 1"), "unknown key"),
        (FAST.replace('"hi"]', '"nope"]'), "unknown check"),
        (FAST.replace("resolution = 0.1", ""), "resolution"),
        (FAST.replace('generator = "rectangle"', 'generator = "blob"'), "unknown generator"),
        (FAST.replace("n_max = 3", 'n_max = 3\nmodes = 10'), "need modes"),
        (FAST.replace("seed = 3", 'seed = "x"'), "integer"),
        ("this is = not toml [", ""),
    ],
)
def test_config_errors_exit_2(tmp_path, capsys, text, message):
    cfg = write(tmp_path, text)
    assert cli.main(["--out-dir", str(tmp_path / "o"), "run", cfg]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "config error" in err
    assert message in err


def test_missing_files_exit_2(tmp_path):
    assert cli.main(["run", str(tmp_path / "none.toml")]) == cli.EXIT_CONFIG
    assert cli.main(["preset", "no-such-preset"]) == cli.EXIT_CONFIG
    cfg = write(tmp_path, FAST.replace('generator = "rectangle"', 'mask_file = "missing.mask"'))
    assert cli.main(["run", cfg]) == cli.EXIT_CONFIG


def test_violation_exit_1(tmp_path, capsys):
    text = """
[campaign]
name = "strict"
checks = ["example5"]

[domain]
generator = "halfline_truncated"
params = [3.0]
resolution = 0.00390625

[operator]
kind = "weighted_1d"

[sweep]
eps = [0.0205078125, 0.0400390625, 0.0791015625, 0.1572265625]

[tolerances]
example5_rtol = 0.0
"""
    cfg = write(tmp_path, text)
    assert cli.main(["--out-dir", str(tmp_path / "o"), "run", cfg]) == cli.EXIT_VIOLATION
    assert "violation" in capsys.readouterr().out


def test_numerical_failure_exit_3(tmp_path, capsys):
    text = FAST.replace('checks = ["thm4", "thm6", "hi"]', 'checks = ["thm11"]').replace(
        "vectors = 2", "vectors = 2\nshrink_multiples = [1, 2, 4, 8, 16]"
    )
    cfg = write(tmp_path, text)
    assert cli.main(["--out-dir", str(tmp_path / "o"), "run", cfg]) == cli.EXIT_NUMERIC
    assert "numerical failure" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_mask_file_campaign(tmp_path):
    from boundecay.geometry import DomainSpec, build_domain, write_mask_file

    write_mask_file(build_domain(DomainSpec("lshape", (2.0,), 0.1)), tmp_path / "l.mask")
    text = FAST.replace('generator = "rectangle"\nparams = [1.0, 1.0]\n', 'mask_file = "l.mask"\n').replace(
        "resolution = 0.1", "resolution = 0.1"
    )
    cfg = write(tmp_path, text)
    assert cli.main(["--out-dir", str(tmp_path / "o"), "run", cfg]) == 0
    doc = json.loads((tmp_path / "o" / "fast.json").read_text())
    assert doc["status"] == 0


def test_cache_build_and_clear(tmp_path, capsys):
    cfg = write(tmp_path, FAST)
    cache = tmp_path / "cache"
    assert cli.main(["--cache-dir", str(cache), "cache", "build", cfg]) == 0
    files = list(cache.glob("*.bdeig"))
    assert len(files) == 1
    # a cached run gives the same bytes as a fresh one
    assert cli.main(["--cache-dir", str(cache), "--out-dir", str(tmp_path / "a"), "run", cfg]) == 0
    assert cli.main(["--cache-dir", str(tmp_path / "empty"), "--out-dir", str(tmp_path / "b"), "run", cfg]) == 0
    assert (tmp_path / "a" / "fast.csv").read_bytes() == (tmp_path / "b" / "fast.csv").read_bytes()
    assert cli.main(["--cache-dir", str(cache), "cache", "clear"]) == 0
    assert not list(cache.glob("*.bdeig"))
    assert cli.main(["--cache-dir", str(cache), "cache", "build"]) == cli.EXIT_CONFIG


def test_node_cap_flag(tmp_path):
    cfg = write(tmp_path, FAST)
    assert cli.main(["--node-cap", "10", "--out-dir", str(tmp_path / "o"), "run", cfg]) == cli.EXIT_NUMERIC


def test_halfline_preset(tmp_path):
    assert cli.main(["--out-dir", str(tmp_path), "preset", "halfline-heat"]) == 0
    rows = (tmp_path / "halfline-heat.csv").read_text().splitlines()
    assert len(rows) > 5
