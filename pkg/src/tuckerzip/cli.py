"""Command-line front end: compress, decompress, info and sweep."""

import argparse
import csv
import resource
import sys
import time
from pathlib import Path

import numpy as np

from . import pipeline
from ._validation import check_targets
from .container import DTYPES, ContainerError, emit, read_container, read_raw, to_bytes
from .entropy import CODER_NAMES, DecodeError
from .errormodel import DEFAULT_RTMSS
from .tensor import sse_between
from .vectorize import METHODS

CSV_COLUMNS = ["target_re", "achieved_re", "factor", "rtmss", "comp_ms", "decomp_ms"]
VECTORIZATION_FLAGS = {"lex": "lexicographic", "zigzag": "zigzag", "zorder": "zorder"}


class UsageError(Exception):
    pass


def _int_list(text):
    try:
        return tuple(int(x) for x in text.replace("x", ",").split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def load_input(path, shape=None, dtype=None, skip_bytes=0):
    """Read ``.npy`` files directly; anything else as raw little-endian data."""
    path = Path(path)
    if path.suffix == ".npy":
        return np.load(path, allow_pickle=False)
    if shape is None or dtype is None:
        raise UsageError("raw input needs --shape and --dtype")
    return read_raw(path.read_bytes(), dtype, shape, skip_bytes)


def save_output(path, values):
    path = Path(path)
    if path.suffix == ".npy":
        np.save(path, values)
    else:
        path.write_bytes(to_bytes(values))


def _peak_rss_mb():
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


def _compress_options(args):
    return dict(
        rtmss=args.rtmss, mode_order=args.mode_order, storage_order=args.storage_order,
        vectorization=VECTORIZATION_FLAGS[args.vectorization], coder=args.coder,
        split_planes=not args.no_split_planes,
        simple_factor_weights=args.simple_factor_weights, workers=args.threads,
        precision=args.precision)


def _report(values, result, recon, args):
    a = np.asarray(values, dtype=np.float64)
    sse = sse_between(a, recon)
    norm = float(np.sum(a * a))
    re = np.sqrt(sse / norm) if norm > 0 else 0.0
    h = result.header
    lines = [
        ("compressed_bytes", len(result.data)),
        ("compression_factor", f"{result.compression_factor:.6g}"),
        ("achieved_re", f"{re:.6g}"),
        ("achieved_sse", f"{sse:.6g}"),
        ("estimated_sse", f"{result.estimate.total:.6g}"),
        ("target_sse", f"{h.target_sse:.6g}"),
        ("ranks", "x".join(map(str, result.ranks))),
        ("rtmss", h.rtmss),
        ("coder", CODER_NAMES[h.coder]),
        ("vectorization", METHODS[h.vectorization]),
        ("peak_rss_mb", f"{_peak_rss_mb():.1f}"),
    ]
    lines += [(f"time_{k}_ms", f"{1e3 * v:.2f}") for k, v in result.timings.items()]
    for key, value in lines:
        print(f"{key}: {value}" if not args.machine else f"{key}={value}")


def cmd_compress(args):
    target_re, target_sse = args.target_re, args.target_sse
    if target_re is None and target_sse is None:
        raise UsageError("give --target-re or --target-sse")
    if (target_re is not None and target_re <= 0) or (target_sse is not None and target_sse <= 0):
        raise UsageError("the target error must be positive; this is a lossy compressor, "
                         "use a small target such as --target-re 1e-6 for near-lossless output")
    check_targets(target_re, target_sse)
    values = load_input(args.input, args.shape, args.dtype, args.skip_bytes)
    result = pipeline.compress(values, target_re=target_re, target_sse=target_sse,
                               keep_reconstruction=True, **_compress_options(args))
    Path(args.output).write_bytes(result.data)
    if not args.quiet:
        _report(values, result, emit(result.reconstruction, values.dtype), args)
    return 0


def cmd_decompress(args):
    data = Path(args.input).read_bytes()
    values = pipeline.decompress(data, args.threads, args.dtype)
    save_output(args.output, values)
    return 0


def cmd_info(args):
    data = Path(args.input).read_bytes()
    h = read_container(data).header
    print(f"file_bytes: {len(data)}")
    print(f"dtype: {h.dtype}")
    print(f"shape: {'x'.join(map(str, h.mode_sizes))}")
    if h.zero:
        print("content: constant zero")
    print(f"ranks: {'x'.join(map(str, h.ranks))}")
    print(f"compression_order: {','.join(map(str, h.compression_order))}")
    print(f"storage_order: {','.join(map(str, h.storage_order))}")
    print(f"vectorization: {METHODS[h.vectorization]}")
    print(f"coder: {CODER_NAMES.get(h.coder, h.coder)}")
    print(f"split_planes: {h.split}")
    print(f"factor_weights: {'simple' if h.simple_weights else 'alpha'}")
    print(f"rtmss: {h.rtmss}")
    print(f"target_sse: {h.target_sse:.6g}")
    print(f"recorded_truncation_sse: {h.truncation_sse:.6g}")
    print(f"recorded_core_sse: {h.core_sse:.6g}")
    print(f"recorded_estimate_sse: {h.estimate_sse:.6g}")
    re = np.sqrt(h.estimate_sse / h.norm_sq) if h.norm_sq > 0 else 0.0
    print(f"recorded_estimate_re: {re:.6g}")
    print(f"compression_factor: {h.original_bytes / len(data):.6g}")
    return 0


def cmd_sweep(args):
    values = load_input(args.input, args.shape, args.dtype, args.skip_bytes)
    a = np.asarray(values, dtype=np.float64)
    norm = float(np.sum(a * a))
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    failures = 0
    try:
        writer = csv.writer(out)
        writer.writerow(CSV_COLUMNS)
        options = _compress_options(args)
        for rtmss in args.rtmss_grid:
            for target in args.errors:
                options["rtmss"] = rtmss
                try:
                    t0 = time.perf_counter()
                    result = pipeline.compress(values, target_re=target, **options)
                    t1 = time.perf_counter()
                    recon = pipeline.decompress(result.data, args.threads)
                    t2 = time.perf_counter()
                except (ValueError, DecodeError) as exc:
                    failures += 1
                    print(f"sweep cell target_re={target} rtmss={rtmss} failed: {exc}",
                          file=sys.stderr)
                    continue
                re = np.sqrt(sse_between(a, recon) / norm) if norm > 0 else 0.0
                writer.writerow([f"{target:g}", f"{re:.6g}", f"{result.compression_factor:.6g}",
                                 f"{rtmss:g}", f"{1e3 * (t1 - t0):.3f}", f"{1e3 * (t2 - t1):.3f}"])
    finally:
        if out is not sys.stdout:
            out.close()
    return 1 if failures else 0


def _add_input_flags(p):
    p.add_argument("--shape", type=_int_list, help="mode sizes, e.g. 64,64,64 (raw input)")
    p.add_argument("--dtype", choices=sorted(DTYPES), help="element type (raw input)")
    p.add_argument("--skip-bytes", type=int, default=0, help="bytes to skip at the file start")


def _add_codec_flags(p):
    p.add_argument("--rtmss", type=float, default=DEFAULT_RTMSS,
                   help="share of the error budget for rank truncation (default 0.5)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--vectorization", choices=sorted(VECTORIZATION_FLAGS), default="lex")
    p.add_argument("--storage-order", type=_int_list, default=None)
    p.add_argument("--mode-order", type=_int_list, default=None)
    p.add_argument("--coder", choices=["ac", "rans"], default="ac")
    p.add_argument("--no-split-planes", action="store_true")
    p.add_argument("--simple-factor-weights", action="store_true")
    p.add_argument("--precision", choices=["float64", "float32"], default="float64")


def build_parser():
    parser = argparse.ArgumentParser(prog="tuckerzip", description="Lossy Tucker tensor compressor")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="compress a raw or .npy tensor")
    p.add_argument("input")
    p.add_argument("output")
    _add_input_flags(p)
    target = p.add_mutually_exclusive_group()
    target.add_argument("--target-re", type=float)
    target.add_argument("--target-sse", type=float)
    _add_codec_flags(p)
    p.add_argument("--machine", action="store_true", help="print key=value statistics")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="decompress to raw bytes or .npy")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--dtype", choices=sorted(DTYPES), default=None,
                   help="output type (default: the source type)")
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("info", help="print the header of a compressed file")
    p.add_argument("input")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("sweep", help="CSV of results over error and rtmss grids")
    p.add_argument("input")
    _add_input_flags(p)
    p.add_argument("--errors", type=_float_list, default=[1e-1, 1e-2, 1e-3])
    _add_codec_flags(p)
    p.add_argument("--rtmss-grid", type=_float_list, default=[DEFAULT_RTMSS])
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"tuckerzip: {exc}", file=sys.stderr)
        return 2
    except (ContainerError, DecodeError) as exc:
        print(f"tuckerzip: corrupt input: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"tuckerzip: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
