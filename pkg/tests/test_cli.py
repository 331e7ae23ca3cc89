import csv
import io
import subprocess
import sys

import numpy as np
import pytest

from corpus import load
from tuckerzip import compress, decompress
from tuckerzip.cli import main


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture
def smooth_npy(tmp_path):
    path = tmp_path / "smooth.npy"
    np.save(path, load("smooth"))
    return path


def test_compress_decompress_npy(tmp_path, smooth_npy, capsys):
    out = tmp_path / "a.tkz"
    assert run("compress", smooth_npy, out, "--target-re", "1e-2", "--machine") == 0
    stats = dict(line.split("=", 1) for line in capsys.readouterr().out.splitlines())
    assert float(stats["achieved_re"]) == pytest.approx(1e-2, rel=0.05)
    assert "estimated_sse" in stats and int(stats["compressed_bytes"]) == out.stat().st_size
    back = tmp_path / "b.npy"
    assert run("decompress", out, back) == 0
    a = load("smooth")
    got = np.load(back)
    assert np.linalg.norm(got - a) / np.linalg.norm(a) == pytest.approx(1e-2, rel=0.05)


def test_cli_matches_library(tmp_path, smooth_npy):
    out = tmp_path / "a.tkz"
    flags = ["--target-re", "1e-3", "--rtmss", "0.3", "--coder", "rans", "--vectorization",
             "zorder", "--no-split-planes", "--threads", "2"]
    assert run("compress", smooth_npy, out, *flags, "--quiet") == 0
    lib = compress(load("smooth"), target_re=1e-3, rtmss=0.3, coder="rans",
                   vectorization="zorder", split_planes=False, workers=2)
    assert out.read_bytes() == lib.data
    raw = tmp_path / "a.raw"
    assert run("decompress", out, raw) == 0
    assert raw.read_bytes() == decompress(lib.data).tobytes()


def test_raw_input_and_skip_bytes(tmp_path, capsys):
    a = (np.arange(4 * 5 * 6) % 7).astype(np.uint16).reshape(4, 5, 6)
    src = tmp_path / "in.raw"
    src.write_bytes(b"\x01\x02" + a.tobytes())
    out = tmp_path / "x.tkz"
    assert run("compress", src, out, "--shape", "4,5,6", "--dtype", "uint16", "--skip-bytes", 2,
               "--target-re", "1e-6", "--quiet") == 0
    back = tmp_path / "back.raw"
    assert run("decompress", out, back) == 0
    assert back.read_bytes() == a.tobytes()
    assert run("compress", src, out, "--target-re", "1e-2") == 2
    assert "--shape" in capsys.readouterr().err


def test_usage_errors(tmp_path, smooth_npy, capsys):
    out = tmp_path / "a.tkz"
    assert run("compress", smooth_npy, out, "--target-re", "0") == 2
    assert "lossy" in capsys.readouterr().err
    assert run("compress", smooth_npy, out) == 2
    with pytest.raises(SystemExit):
        run("compress", smooth_npy, out, "--target-re", "1e-2", "--target-sse", "1")
    assert run("compress", tmp_path / "missing.npy", out, "--target-re", "1e-2") == 1


def test_corrupt_container(tmp_path, smooth_npy, capsys):
    out = tmp_path / "a.tkz"
    run("compress", smooth_npy, out, "--target-re", "1e-2", "--quiet")
    out.write_bytes(out.read_bytes()[:-4])
    assert run("decompress", out, tmp_path / "b.npy") == 1
    assert "section" in capsys.readouterr().err


def test_info(tmp_path, smooth_npy, capsys):
    out = tmp_path / "a.tkz"
    run("compress", smooth_npy, out, "--target-re", "1e-2", "--mode-order", "2,1,0", "--quiet")
    capsys.readouterr()
    assert run("info", out) == 0
    info = dict(line.split(": ", 1) for line in capsys.readouterr().out.splitlines())
    assert int(info["file_bytes"]) == out.stat().st_size
    assert info["compression_order"] == "2,1,0" and info["shape"] == "32x32x32"
    assert "content" not in info
    zero = tmp_path / "z.npy"
    np.save(zero, np.zeros((4, 4, 4)))
    run("compress", zero, out, "--target-re", "1e-2", "--quiet")
    run("info", out)
    assert "content: constant zero" in capsys.readouterr().out


def test_sweep(tmp_path, smooth_npy, capsys):
    assert run("sweep", smooth_npy, "--errors", "1e-2,1e-3", "--rtmss-grid", "0.1,0.9") == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert list(rows[0]) == ["target_re", "achieved_re", "factor", "rtmss", "comp_ms", "decomp_ms"]
    assert len(rows) == 4
    for row in rows:
        assert float(row["achieved_re"]) == pytest.approx(float(row["target_re"]), rel=0.05)
        assert float(row["factor"]) > 1 and float(row["comp_ms"]) > 0


def test_module_entry_point(tmp_path, smooth_npy):
    out = tmp_path / "a.tkz"
    proc = subprocess.run([sys.executable, "-m", "tuckerzip", "compress", str(smooth_npy),
                           str(out), "--target-re", "1e-2", "--quiet"], capture_output=True)
    assert proc.returncode == 0 and out.exists()
