import csv
import json
import subprocess
import sys
import time

import numpy as np
import pytest

from dbarsolve import SampledForm
from dbarsolve.cli import main
from dbarsolve.domain_geometry import PlanarDomain


@pytest.fixture
def disc_cfg(tmp_path):
    path = tmp_path / "disc.json"
    path.write_text(json.dumps({"kind": "disc"}))
    return path


@pytest.fixture
def bidisc_cfg(tmp_path):
    path = tmp_path / "bidisc.json"
    path.write_text(json.dumps({"factors": [{"kind": "disc"}, {"kind": "disc"}]}))
    return path


def read_u(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = (data.shape[1] - 2) // 2
    return data[:, 0:2 * n:2] + 1j * data[:, 1:2 * n:2], data[:, -2] + 1j * data[:, -1]


def test_solve_disc_constant(disc_cfg, tmp_path, capsys):
    out = tmp_path / "u.csv"
    code = main(["solve", "--domain", str(disc_cfg), "--form", "poly: 1|0|0", "--grid", "64", "--op", "K",
                 "--out", str(out)])
    assert code == 0
    w, u = read_u(out)
    assert np.max(np.abs(u - np.conj(w[:, 0]))) <= 1e-10
    err = capsys.readouterr().err
    assert "residual" in err and "orthogonality" in err


def test_solve_csv_header_and_precision(disc_cfg, tmp_path):
    out = tmp_path / "u.csv"
    main(["solve", "--domain", str(disc_cfg), "--form", "poly: 1|0|0", "--out", str(out), "--no-check"])
    lines = out.read_text().split("\n")
    assert lines[0] == "re_w1,im_w1,re_u,im_u"
    assert "\r" not in out.read_text()


def test_solve_is_byte_identical(bidisc_cfg, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["solve", "--domain", str(bidisc_cfg), "--form", "poly: 1|0 0|0 1 ; 1|0 0|1 0", "--grid", "16",
            "--no-check", "--max-degree", "1"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_missing_form_file(disc_cfg, tmp_path, capsys):
    missing = tmp_path / "absent_form.txt"
    assert main(["solve", "--domain", str(disc_cfg), "--form", str(missing)]) == 2
    assert "absent_form.txt" in capsys.readouterr().err


def test_sampled_form_with_T(bidisc_cfg, tmp_path, capsys):
    disc = PlanarDomain.unit_disc()
    f = SampledForm.from_functions([disc, disc], 9, [[(1.0, [None, None])], []])
    path = tmp_path / "f.csv"
    f.to_csv(path)
    assert main(["solve", "--domain", str(bidisc_cfg), "--form", str(path), "--op", "T"]) == 3
    assert "unsupported" in capsys.readouterr().err


def test_non_closed_form(bidisc_cfg):
    assert main(["solve", "--domain", str(bidisc_cfg), "--form", "poly: 1|0 0|0 1 ; 0|0 0|0 0"]) == 2


def test_unknown_suite(capsys):
    assert main(["verify", "--suite", "nope"]) == 2
    assert "nope" in capsys.readouterr().err


def test_verify_disc_oracles(tmp_path):
    out = tmp_path / "verify.csv"
    t0 = time.perf_counter()
    assert main(["verify", "--suite", "disc-oracles", "--out", str(out)]) == 0
    assert time.perf_counter() - t0 <= 60
    rows = list(csv.DictReader(out.open()))
    assert [r["criterion"] for r in rows] == ["1", "2", "3"]
    assert all(r["passed"] == "1" for r in rows)


def test_bad_arguments_exit_2():
    assert main(["solve"]) == 2
    assert main(["frobnicate"]) == 2


def test_kernel_dump_single(capsys):
    assert main(["kernel-dump", "--n", "1", "--idx", "1", "--j", "1"]) == 0
    assert capsys.readouterr().out.strip() == "S_1"


def test_kernel_dump_s2_derivative(capsys):
    assert main(["kernel-dump", "--n", "2", "--idx", "1,2", "--j", "2", "--deriv"]) == 0
    assert capsys.readouterr().out.strip() == (
        "dSdzbar_1*S_2*u_1/(u_1 + u_2) - S_1*S_2*(w_1 - z_1)*u_2/(u_1 + u_2)^2")


def test_kernel_dump_spot_values(capsys):
    assert main(["kernel-dump", "--n", "2", "--idx", "1,2", "--j", "1", "--points", "3"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 4 and all("->" in line for line in lines[1:])


def test_kernel_dump_bad_index():
    assert main(["kernel-dump", "--n", "2", "--idx", "2,1", "--j", "1"]) == 2
    assert main(["kernel-dump", "--n", "2", "--idx", "1,3", "--j", "1"]) == 2


def test_norm_scan_zero_family(bidisc_cfg, tmp_path):
    out = tmp_path / "r.csv"
    assert main(["norm-scan", "--domain", str(bidisc_cfg), "--family", "zero", "--op", "T", "--p", "2,inf",
                 "--resolutions", "32", "--out", str(out)]) == 0
    rows = out.read_text().strip().splitlines()
    assert rows[0].startswith("operator,family") and len(rows) == 3


def test_norm_scan_unknown_family(bidisc_cfg):
    assert main(["norm-scan", "--domain", str(bidisc_cfg), "--family", "nope"]) == 2


def test_console_script_entry_point():
    out = subprocess.run([sys.executable, "-m", "dbarsolve.cli", "kernel-dump", "--n", "1", "--idx", "1",
                          "--j", "1"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip() == "S_1"
