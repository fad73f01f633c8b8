import csv
import io
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from fatoushadow import cli
from fatoushadow.blaschke import BlaschkeProduct, preimage_tree


def run(tmp_path, config, command=None, extra=()):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    out, err = io.StringIO(), io.StringIO()
    code = cli.run([command or config["command"], "--config", str(path), *extra], out, err)
    return code, out.getvalue(), err.getvalue()


def rows(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def summary(text):
    return dict(ln[2:].split(",", 1) for ln in text.splitlines() if ln.startswith("# "))


SQUARE = {"blaschke": {"theta": 0, "zeros": [[0, 0], [0, 0]]}}
H = {"blaschke": {"theta": 0, "zeros": [[0, 0], [0.5, 0]]}}


class TestPreimages:
    def test_power_map_depth_one(self, tmp_path):
        code, out, _ = run(tmp_path, {"command": "preimages", "map": SQUARE,
                                      "base_point": [0.5, 0], "depth": 1})
        assert code == 0
        pts = sorted(complex(float(r["re"]), float(r["im"])).real for r in rows(out))
        assert pts == pytest.approx([-math.sqrt(0.5), 0.5, math.sqrt(0.5)], abs=1e-14)

    def test_closed_form_matches_solver(self, tmp_path):
        base = {"command": "preimages", "map": SQUARE, "base_point": [0.3, 0.2], "depth": 4}
        a = rows(run(tmp_path, base)[1])
        b = rows(run(tmp_path, dict(base, method="closed_form"))[1])
        za = np.array([complex(float(r["re"]), float(r["im"])) for r in a])
        zb = np.array([complex(float(r["re"]), float(r["im"])) for r in b])
        assert len(za) == len(zb) == 31
        assert np.abs(za[:, None] - zb[None, :]).min(axis=1).max() < 1e-12

    def test_depth_zero(self, tmp_path):
        _, out, _ = run(tmp_path, {"command": "preimages", "map": H, "depth": 0})
        assert len(rows(out)) == 1

    def test_polynomial(self, tmp_path):
        code, out, _ = run(tmp_path, {"command": "preimages", "depth": 1,
                                      "map": {"polynomial": {"coefficients": [[-0.5, 0], [0, 0], [1, 0]]}}})
        assert code == 0
        assert sorted(float(r["re"]) for r in rows(out)) == pytest.approx(
            [(1 - math.sqrt(3)) / 2, (math.sqrt(3) - 1) / 2], abs=1e-14)

    def test_round_trip_17_digits(self, tmp_path):
        g = BlaschkeProduct(0.3, [0, 0.5 + 0.1j, -0.2j])
        cfg = {"command": "preimages", "map": {"blaschke": {"theta": 0.3,
               "zeros": [[0, 0], [0.5, 0.1], [0, -0.2]]}}, "base_point": [0.1, 0.05], "depth": 3}
        _, out, _ = run(tmp_path, cfg)
        tree = preimage_tree(g, 0.1 + 0.05j, 3)
        parsed = rows(out)
        assert len(parsed) == len(tree)
        for r, z, k, res in zip(parsed, tree.points, tree.generation, tree.residual):
            assert float(r["re"]) == z.real and float(r["im"]) == z.imag
            assert float(r["modulus"]) == abs(z)
            assert float(r["residual"]) == res
            assert int(r["generation"]) == k


class TestShadow:
    def test_single_point(self, tmp_path):
        code, out, _ = run(tmp_path, {"command": "shadow", "map": SQUARE, "base_point": [0.5, 0],
                                      "depth": 3, "grid": {"points": [[0, 0]]}})
        assert code == 0
        (r,) = rows(out)
        assert float(r["distance"]) == pytest.approx(math.log(3), rel=1e-15)
        s = summary(out)
        assert float(s["C0_doubleprime"]) == pytest.approx(25.679, abs=1e-2)

    def test_general_product_absent_theory(self, tmp_path):
        _, out, _ = run(tmp_path, {"command": "shadow", "map": H, "depth": 4,
                                   "grid": {"i_max": 2, "angles": 8}})
        s = summary(out)
        assert s["C0"] == "absent" and s["C0_prime"] == "absent"
        assert s["grid"] and int(s["samples"]) == 16

    def test_output_file(self, tmp_path):
        target = tmp_path / "shadow.csv"
        code, out, _ = run(tmp_path, {"command": "shadow", "map": H, "depth": 4,
                                      "grid": {"points": [[0.2, 0.1]]}},
                           extra=("--out", str(target)))
        assert code == 0 and out == ""
        assert len(rows(target.read_text())) == 1


class TestVerify:
    def test_square_passes(self, tmp_path):
        code, out, _ = run(tmp_path, {"command": "verify", "map": SQUARE, "epsilon": 0.5,
                                      "samples": 2000})
        assert code == 0
        rep = json.loads(out)
        assert rep["pass"] and rep["annulus"]["r0"] == pytest.approx(0.75, abs=1e-3)
        assert rep["annulus_expansion"]["violations"] == []

    def test_general_boundary_derivative(self, tmp_path):
        code, out, _ = run(tmp_path, {"command": "verify", "map": H, "samples": 2000})
        assert code == 0
        assert json.loads(out)["boundary_derivative"]["min_modulus"] > 1


class TestExitCodes:
    def test_exit_0(self, tmp_path):
        assert run(tmp_path, {"command": "preimages", "map": H, "depth": 2})[0] == 0

    def test_exit_2_malformed_zero(self, tmp_path):
        code, _, err = run(tmp_path, {"command": "preimages", "map": {"blaschke": {"zeros": [[0]]}}})
        assert code == 2 and "config" in err

    def test_exit_2_zero_outside_disk(self, tmp_path):
        assert run(tmp_path, {"command": "preimages",
                              "map": {"blaschke": {"zeros": [[0, 0], [1.5, 0]]}}})[0] == 2

    def test_exit_2_resolution_zero(self, tmp_path):
        code, _, _ = run(tmp_path, {"command": "render", "output": str(tmp_path / "x.ppm"),
                                    "resolution": [0, 0],
                                    "map": {"polynomial": {"coefficients": [[0, 0], [0, 0], [1, 0]]}}})
        assert code == 2

    def test_exit_2_unknown_key_and_nan(self, tmp_path):
        assert run(tmp_path, {"command": "preimages", "map": H, "bogus": 1})[0] == 2
        path = tmp_path / "nan.json"
        path.write_text('{"command": "preimages", "map": {"blaschke": {"zeros": [[NaN, 0]]}}}')
        assert cli.run(["preimages", "--config", str(path)], io.StringIO(), io.StringIO()) == 2

    def test_exit_2_missing_config(self, tmp_path):
        assert cli.run(["preimages", "--config", str(tmp_path / "nope.json")],
                       io.StringIO(), io.StringIO()) == 2

    def test_exit_3_annulus_not_found(self, tmp_path):
        code, _, err = run(tmp_path, {"command": "verify", "map": SQUARE, "epsilon": 10})
        assert code == 3 and "numeric" in err

    def test_exit_3_capacity(self, tmp_path):
        assert run(tmp_path, {"command": "preimages", "map": SQUARE, "base_point": [0.5, 0],
                              "depth": 25})[0] == 3

    def test_exit_4_property_violation(self, tmp_path):
        # this product's outer-direction gap grows from generation 3 to 4
        m = {"blaschke": {"theta": 0, "zeros": [[0, 0], [0.6, -0.5]]}}
        code, out, err = run(tmp_path, {"command": "verify", "map": m, "samples": 500,
                                        "profile_depth": 6})
        assert code == 4
        assert "density_profile" in err
        assert json.loads(out)["density_profile"]["pass"] is False

    def test_exit_5_unwritable(self, tmp_path):
        code, _, err = run(tmp_path, {"command": "preimages", "map": H, "depth": 1,
                                      "output": str(tmp_path / "missing" / "out.csv")})
        assert code == 5 and "I/O" in err


class TestRender:
    def test_render_twice_identical(self, tmp_path):
        cfg = {"command": "render", "resolution": [96, 64], "max_iter": 200,
               "viewport": {"center": [0, 0], "width": 3, "height": 2},
               "overlay_depth": 6,
               "map": {"polynomial": {"coefficients": [[-0.5, 0], [0, 0], [1, 0]]}}}
        a, b = tmp_path / "a.ppm", tmp_path / "b.ppm"
        assert run(tmp_path, dict(cfg, output=str(a)))[0] == 0
        assert run(tmp_path, dict(cfg, output=str(b)))[0] == 0
        data = a.read_bytes()
        assert data == b.read_bytes()
        assert data.startswith(b"P6\n96 64\n255\n")

    def test_module_entry_point(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"command": "preimages", "map": H, "depth": 1}))
        proc = subprocess.run([sys.executable, "-m", "fatoushadow", "preimages", "--config", str(path)],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stdout.splitlines()[0] == "generation,re,im,modulus,residual"


class TestConfigRoundTrip:
    def test_lossless(self):
        text = json.dumps({"command": "shadow", "map": {"blaschke": {"theta": 0.1 + 2**-40,
                           "zeros": [[0, 0], [1 / 3, -2 / 7]]}}, "base_point": [math.pi / 10, 1e-17]})
        cfg = cli.parse_config(text)
        again = cli.parse_config(cli.config_to_json(cfg))
        assert again.blaschke == cfg.blaschke
        assert again.base_point == cfg.base_point

    def test_fmt_round_trip(self, rng):
        x = rng.normal(size=1000) * 10.0 ** rng.integers(-300, 300, size=1000)
        assert all(float(cli.fmt(v)) == v for v in x)
