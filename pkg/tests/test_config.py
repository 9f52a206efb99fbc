import logging
from pathlib import Path

import pytest

from config import DEFAULT_SETTINGS, Grids, SolverOptions, Tolerances, load_settings
from errors import InputError


def test_defaults_when_default_file_missing(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert load_settings() == DEFAULT_SETTINGS
    assert DEFAULT_SETTINGS.tolerances.sharp == 1e-10
    assert DEFAULT_SETTINGS.solver.grid_points == 4000


def test_explicit_missing_file_is_an_error(tmp_path):
    with pytest.raises(InputError):
        load_settings(tmp_path / "nope.toml")


def test_partial_file_keeps_defaults(tmp_path):
    path = tmp_path / "s.toml"
    path.write_text("[tolerances]\nsharp = 1e-6\n\n[grids]\nsamples = 7\n", encoding="utf-8")
    s = load_settings(path)
    assert s.tolerances == Tolerances(sharp=1e-6)
    assert s.grids == Grids(samples=7)
    assert isinstance(s.grids.samples, int)
    assert s.solver == SolverOptions()


def test_example_file_matches_defaults():
    root = Path(__file__).resolve().parent.parent
    assert load_settings(root / "settings.example.toml") == DEFAULT_SETTINGS


def test_unknown_keys_warn(tmp_path, caplog):
    path = tmp_path / "s.toml"
    path.write_text("[grids]\nsamplez = 3\n\n[extras]\nx = 1\n", encoding="utf-8")
    with caplog.at_level(logging.WARNING, logger="config"):
        s = load_settings(path)
    assert s.grids == Grids()
    assert "samplez" in caplog.text
    assert "extras" in caplog.text


@pytest.mark.parametrize(
    "body",
    [
        "[tolerances\nsharp = 1",
        "[tolerances]\nsharp = 'tight'\n",
        "[solver]\ngrid_points = 2\n",
        "[solver]\ntol = 0\n",
    ],
)
def test_bad_files(tmp_path, body):
    path = tmp_path / "s.toml"
    path.write_text(body, encoding="utf-8")
    with pytest.raises(InputError):
        load_settings(path)


def test_solver_options_from_json():
    assert SolverOptions.from_json(None) == SolverOptions()
    assert SolverOptions.from_json("") == SolverOptions()
    opts = SolverOptions.from_json('{"grid_points": 500, "tol": 1e-9}')
    assert opts == SolverOptions(grid_points=500, tol=1e-9)
    for bad in ("{", "[1, 2]", '{"max_iters": 0}'):
        with pytest.raises(InputError):
            SolverOptions.from_json(bad)


def test_retired_keys_are_unknown(tmp_path, caplog):
    path = tmp_path / "s.toml"
    path.write_text("[tolerances]\nrigidity = 1e-8\n\n[grids]\nrearrange_samples = 10\n", encoding="utf-8")
    with caplog.at_level(logging.WARNING, logger="config"):
        s = load_settings(path)
    assert s == DEFAULT_SETTINGS
    assert "rigidity" in caplog.text
    assert "rearrange_samples" in caplog.text
