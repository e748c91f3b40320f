import os

import pytest

import fractrans
from fractrans.core.benchcfg import (
    BENCHCFG_FILENAME,
    Field,
    check_and_copy_benchcfg,
    check_throw_error,
    open_benchcfg,
)
from fractrans.core.errors import ConfigError

PKG_PATH = os.path.dirname(fractrans.__file__)


def write_config(tmp_path, text):
    path = tmp_path / "user.yaml"
    path.write_text(text)
    return str(path)


class TestTemplate:
    def test_default_preset(self):
        cfg = open_benchcfg(None, "default", PKG_PATH)
        assert cfg["SOLVER"]["MAX_ITERS"] == 500
        assert cfg["SOLVER"]["OBJ_TOL"] == pytest.approx(1e-8)
        assert cfg["SOLVER"]["STEP_TOL"] is None
        assert cfg["RUN"]["SEEDS"] == [0]
        assert cfg["SECRECY"]["LEGIT_GAINS"] == [[1.0, 0.1], [0.09, 0.87]]

    def test_monte_carlo_preset(self):
        cfg = open_benchcfg(None, "monte_carlo", PKG_PATH)
        assert cfg["RUN"]["SEEDS"] == list(range(50))
        assert cfg["RUN"]["ORACLE"] is True
        assert cfg["POWER"]["CELLS"] == 3

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            open_benchcfg(None, "nonexistent", PKG_PATH)


class TestUserFile:
    def test_merges_over_template(self, tmp_path):
        path = write_config(tmp_path, "default:\n  SOLVER:\n    MAX_ITERS: 7\n    STEP_TOL: 1.0e-6\n")
        cfg = open_benchcfg(path, "default", PKG_PATH)
        assert cfg["SOLVER"]["MAX_ITERS"] == 7
        assert cfg["SOLVER"]["STEP_TOL"] == pytest.approx(1e-6)
        assert cfg["SOLVER"]["INNER_MAX_ITERS"] == 2000

    def test_lists_are_replaced(self, tmp_path):
        path = write_config(tmp_path, "default:\n  RUN:\n    SEEDS: [5, 6]\n")
        assert open_benchcfg(path, "default", PKG_PATH)["RUN"]["SEEDS"] == [5, 6]

    def test_wrong_type(self, tmp_path):
        path = write_config(tmp_path, "default:\n  SOLVER:\n    MAX_ITERS: many\n")
        with pytest.raises(ConfigError):
            open_benchcfg(path, "default", PKG_PATH)

    def test_bad_matrix(self, tmp_path):
        path = write_config(tmp_path, "default:\n  SECRECY:\n    LEGIT_GAINS: [[1.0, 0.1], [0.09]]\n")
        with pytest.raises(ConfigError):
            open_benchcfg(path, "default", PKG_PATH)

    def test_empty_seed_list(self, tmp_path):
        path = write_config(tmp_path, "default:\n  RUN:\n    SEEDS: []\n")
        with pytest.raises(ConfigError):
            open_benchcfg(path, "default", PKG_PATH)

    def test_rate_window(self, tmp_path):
        path = write_config(tmp_path, "default:\n  RATES:\n    K_LO: 300\n")
        with pytest.raises(ConfigError):
            open_benchcfg(path, "default", PKG_PATH)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            open_benchcfg(str(tmp_path / "absent.yaml"), "default", PKG_PATH)


class TestFields:
    def test_missing_required(self):
        with pytest.raises(ConfigError):
            check_throw_error({"RUN": {}}, ["RUN", "WORKERS"], Field("int"))

    def test_optional_set_to_none(self):
        cfg = {"RUN": {}}
        check_throw_error(cfg, ["RUN", "VARIANT"], Field("string", optional=True))
        assert cfg["RUN"]["VARIANT"] is None

    def test_converter(self):
        cfg = {"SOLVER": {"OBJ_TOL": "1e-6"}}
        check_throw_error(cfg, ["SOLVER", "OBJ_TOL"], Field("number", conv=float))
        assert cfg["SOLVER"]["OBJ_TOL"] == 1e-6

    def test_bool_is_not_int(self):
        with pytest.raises(ConfigError):
            check_throw_error({"RUN": {"WORKERS": True}}, ["RUN", "WORKERS"], Field("int"))


def test_copy_template(tmp_path):
    check_and_copy_benchcfg(str(tmp_path), PKG_PATH)
    target = tmp_path / BENCHCFG_FILENAME
    assert target.exists()
    target.write_text("edited")
    check_and_copy_benchcfg(str(tmp_path), PKG_PATH)
    assert target.read_text() == "edited"
    check_and_copy_benchcfg(str(tmp_path), PKG_PATH, force=True)
    assert target.read_text().startswith("default:")
