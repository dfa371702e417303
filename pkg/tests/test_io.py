from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harmonic_widths.ect1d import Interval, WeightSystem, build_ect
from harmonic_widths.errors import InputError, IoFailure
from harmonic_widths.io import (
    Report,
    Table,
    dumps,
    emit_report,
    format_number,
    load_report,
    load_weights,
    read_csv,
    save_basis,
    save_field,
    save_spectrum,
    save_weights,
    write_csv,
)
from harmonic_widths.elliptic2d import RectGrid


def random_report(rng: np.random.Generator) -> Report:
    def value():
        kind = rng.integers(4)
        if kind == 0:
            return int(rng.integers(-1000, 1000))
        if kind == 1:
            return math.inf
        return float(rng.standard_normal() * 10.0 ** rng.integers(-30, 30))

    summary = {f"k{j}": value() for j in range(int(rng.integers(1, 6)))}
    summary["nested"] = {"list": [value() for _ in range(3)], "flag": bool(rng.integers(2))}
    ncol = int(rng.integers(1, 5))
    rows = [[value() for _ in range(ncol)] for _ in range(int(rng.integers(0, 6)))]
    return Report("r", summary, {"t": Table([f"c{j}" for j in range(ncol)], rows)})


class TestNumbers:
    def test_format(self):
        assert format_number(math.inf) == "inf"
        assert format_number(-math.inf) == "-inf"
        assert format_number(3) == "3"
        assert format_number(True) == "1"
        assert float(format_number(0.1)) == 0.1

    @settings(max_examples=200)
    @given(st.floats(allow_nan=False))
    def test_float_exact(self, x):
        assert float(format_number(x)) == x


class TestReports:
    def test_randomized_round_trip(self, tmp_path):
        rng = np.random.Generator(np.random.Philox(99))
        for i in range(20):
            rep = random_report(rng)
            out = tmp_path / str(i)
            emit_report(rep, out)
            back = load_report(out, "r", ["t"])
            assert back.summary == rep.summary
            assert list(back.summary) == list(rep.summary)
            assert back.tables["t"] == rep.tables["t"]

    def test_inf_is_string(self):
        assert '"value": "inf"' in dumps({"value": math.inf})

    def test_empty_table(self, tmp_path):
        p = write_csv(tmp_path / "e.csv", ["p", "N", "value"], [])
        assert p.read_bytes() == b"p,N,value\n"
        assert read_csv(p) == (["p", "N", "value"], [])

    def test_lf_only(self, tmp_path):
        p = write_csv(tmp_path / "x.csv", ["a"], [[1.5], [2]])
        assert b"\r" not in p.read_bytes()

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoFailure):
            read_csv(tmp_path / "nope.csv")

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "f"
        blocker.write_text("")
        with pytest.raises(IoFailure):
            write_csv(blocker / "x.csv", ["a"], [])


class TestModuleTables:
    def test_weights_round_trip(self, tmp_path):
        ws = WeightSystem.from_functions(Interval(0.0, 2.0), [lambda t: 1 + t, lambda t: np.exp(t)], 33)
        back = load_weights(save_weights(tmp_path / "w.csv", ws))
        np.testing.assert_array_equal(back.values, ws.values)
        assert back.interval == ws.interval

    def test_weights_nonuniform(self, tmp_path):
        t = np.linspace(0, 1, 20) ** 2
        write_csv(tmp_path / "w.csv", ["t", "rho_1"], np.column_stack([t, 1 + t]))
        with pytest.raises(InputError):
            load_weights(tmp_path / "w.csv")

    def test_weights_header(self, tmp_path):
        write_csv(tmp_path / "w.csv", ["x", "rho_1"], [[0, 1], [1, 1]])
        with pytest.raises(InputError):
            load_weights(tmp_path / "w.csv")

    def test_basis_and_spectrum(self, tmp_path):
        b = build_ect(WeightSystem.constant(Interval(0.0, 1.0), [1, 2], 17))
        h, rows = read_csv(save_basis(tmp_path / "b.csv", b))
        assert h == ["t", "v_1", "v_2"] and len(rows) == 17
        h, rows = read_csv(save_spectrum(tmp_path / "s.csv", [0.0, 1.5]))
        assert h == ["j", "lambda"] and rows == [[1, 0.0], [2, 1.5]]

    def test_field(self, tmp_path):
        g = RectGrid(5)
        h, rows = read_csv(save_field(tmp_path / "f.csv", g, np.arange(25.0)))
        assert h == ["x", "y", "value"]
        assert rows[1] == [0.0, 0.25, 1.0]
