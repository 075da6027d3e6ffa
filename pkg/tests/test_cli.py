import subprocess
import sys

import numpy as np
import pytest

from turbforward.cli import main
from turbforward.io import read_key_values, verify_manifest, write_pgm


def write_config(path, **items):
    path.write_text("".join(f"{k} = {v}\n" for k, v in items.items()))
    return path


def test_matrix_oracle_run(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.txt", experiment="matrix_oracle", output_dir=tmp_path / "out")
    assert main(["run", str(cfg)]) == 0
    text = (tmp_path / "out" / "manifest.txt").read_text()
    assert "TB_neq_BT: true" in text
    assert "status: ok" in text
    assert "TB_neq_BT: true" in capsys.readouterr().out


def test_manifest_complete(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path / "c.txt", experiment="matrix_oracle", output_dir=out, oracle_trials=10)
    assert main(["run", str(cfg)]) == 0
    listed = {k[len("file.") :] for k in read_key_values(out / "manifest.txt") if k.startswith("file.")}
    on_disk = {p.name for p in out.iterdir()} - {"manifest.txt"}
    assert listed == on_disk
    assert verify_manifest(out / "manifest.txt") == []
    shift = np.loadtxt(out / "shift_matrix.txt")
    np.testing.assert_array_equal(shift, np.eye(64, k=1))


def test_point_grid_run_outputs(tmp_path):
    out = tmp_path / "pg"
    cfg = write_config(
        tmp_path / "c.txt", experiment="point_grid", output_dir=out, height=128, width=128, spot_spacing=64
    )
    assert main(["run", str(cfg)]) == 0
    for name in ("blur_then_tilt", "tilt_then_blur", "full_model"):
        assert (out / f"{name}.pgm").exists() and (out / f"{name}.f32").exists()
    table = (out / "spots.tsv").read_text().splitlines()
    assert table[0].startswith("row\tcol") and len(table) == 5
    assert (out / "kernels.f32.txt").exists()
    variances = read_key_values(out / "modal_variances.txt")
    assert float(variances["mode_1"]) == 0.0 and len(variances) == 36


def test_rerun_bit_identical(tmp_path):
    def run(name):
        cfg = write_config(
            tmp_path / f"{name}.txt",
            experiment="difference_scaling",
            output_dir=tmp_path / name,
            height=96,
            width=96,
            seed=4,
        )
        assert main(["run", str(cfg)]) == 0
        return tmp_path / name

    a, b = run("a"), run("b")
    for f in sorted(a.glob("*.f32")):
        assert f.read_bytes() == (b / f.name).read_bytes()


def test_natural_run_reads_pgm(tmp_path):
    rng = np.random.default_rng(0)
    from scipy import ndimage

    img = ndimage.gaussian_filter(rng.random((128, 128)), 3)
    img = (img - img.min()) / (img.max() - img.min())
    write_pgm(tmp_path / "in.pgm", np.rint(img * 65535).astype(np.uint16), 65535)
    cfg = write_config(
        tmp_path / "c.txt", experiment="natural", output_dir=tmp_path / "n", input_image=tmp_path / "in.pgm"
    )
    assert main(["run", str(cfg)]) in (0, 1)
    kv = read_key_values(tmp_path / "n" / "manifest.txt")
    assert "metric.psnr_tb_bt" in kv and "file.difference.pgm" in kv


def test_natural_missing_image_is_usage_error(tmp_path):
    cfg = write_config(tmp_path / "c.txt", experiment="natural", output_dir=tmp_path / "n", input_image="nope.pgm")
    assert main(["run", str(cfg)]) == 2


def test_invariant_failure_exit_code(tmp_path):
    # a step far too small for the second-order fit to land in band
    cfg = write_config(
        tmp_path / "c.txt",
        experiment="difference_scaling",
        output_dir=tmp_path / "s",
        height=96,
        width=96,
        scales="1,0.999",
        scaling_tilt_rms=3.0,
    )
    status = main(["run", str(cfg)])
    kv = read_key_values(tmp_path / "s" / "manifest.txt")
    assert status == (0 if kv["residual_second_order"] == "true" else 1)
    assert kv["status"] == ("ok" if status == 0 else "invariant_failure")


def test_validate(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.txt", experiment="point_grid", output_dir="o")
    assert main(["validate", str(cfg)]) == 0
    assert "kernel_size = 33" in capsys.readouterr().out
    bad = write_config(tmp_path / "b.txt", experiment="point_grid", output_dir="o", colour="red")
    assert main(["validate", str(bad)]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_usage_errors():
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["oracle", "--size", "1"]) == 2
    assert main(["oracle", "--size", "100"]) == 2


def test_oracle_command(capsys):
    assert main(["oracle", "--size", "6", "--seed", "2", "--trials", "10"]) == 0
    out = capsys.readouterr().out
    assert "TB_neq_BT: true" in out and "trials: 10" in out


def test_console_script_module():
    proc = subprocess.run(
        [sys.executable, "-m", "turbforward.cli", "oracle", "--size", "4", "--trials", "4"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0, proc.stderr
