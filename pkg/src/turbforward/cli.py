"""Command line: ``turbforward run|validate|oracle``.

Exit status is 0 when every check passes, 1 when an invariant check fails
and 2 for usage or configuration errors.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from . import __version__
from .analysis import (
    difference_scaling_experiment,
    matrix_oracle_experiment,
    natural_image_experiment,
    point_source_grid_experiment,
)
from .config import ConfigError, ExperimentConfig, dump_config, load_config
from .io import (
    ImageFormatError,
    read_image,
    write_image,
    write_key_values,
    write_manifest,
    write_raw,
    write_table,
    write_variance_table,
)
from .operators import OperatorMatrix
from .psf import save_kernels

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2


class _Outputs:
    """Collects every file written by a run for the manifest."""

    def __init__(self, root: Path):
        self.root = root
        self.files: list[Path] = []

    def image(self, name: str, array, **kwargs) -> None:
        self.files += write_image(self.root / name, array, **kwargs)

    def raw(self, name: str, array) -> None:
        self.files += list(write_raw(self.root / name, array))

    def add(self, *paths) -> None:
        self.files += [Path(p) for p in paths]


def _variance_items(scene) -> dict[int, float]:
    return {j + 1: float(v) for j, v in enumerate(scene.coefficients.variances)}


def _run_point_grid(config: ExperimentConfig, out: _Outputs):
    result = point_source_grid_experiment(config)
    out.image("clean", result.clean)
    out.image("blur_then_tilt", result.blur_then_tilt)
    out.image("tilt_then_blur", result.tilt_then_blur)
    out.image("full_model", result.full)
    columns = ["row", "col", "tilt_row", "tilt_col", "corr_bt", "corr_tb", "fit_shift_row", "fit_shift_col", "full_vs_bt"]
    out.add(write_table(out.root / "spots.tsv", result.spots, columns))
    return result


def _run_natural(config: ExperimentConfig, out: _Outputs):
    try:
        image = read_image(config.input_image)
    except (OSError, ImageFormatError) as exc:
        raise ConfigError(f"cannot read input_image {config.input_image}: {exc}") from exc
    result = natural_image_experiment(image, config)
    out.image("clean", result.clean)
    out.image("blur_then_tilt", result.blur_then_tilt)
    out.image("tilt_then_blur", result.tilt_then_blur)
    out.image("difference", result.report.diff_map)
    out.image("first_order", result.report.first_order_map)
    return result


def _run_matrix_oracle(config: ExperimentConfig, out: _Outputs):
    result = matrix_oracle_experiment(config)
    t, b = result.shift, result.witness
    out.add(t.save_text(out.root / "shift_matrix.txt"))
    out.add(b.save_text(out.root / "blur_witness.txt"))
    out.add(OperatorMatrix(t.matrix @ b.matrix, "FULL", t.image_shape).save_text(out.root / "TB.txt"))
    out.add(OperatorMatrix(b.matrix @ t.matrix, "FULL", t.image_shape).save_text(out.root / "BT.txt"))
    if result.failures:
        (out.root / "failures.txt").write_text("\n".join(result.failures) + "\n")
        out.add(out.root / "failures.txt")
    return result


def _run_difference_scaling(config: ExperimentConfig, out: _Outputs):
    image = None
    if config.input_image is not None:
        try:
            image = read_image(config.input_image)
        except (OSError, ImageFormatError) as exc:
            raise ConfigError(f"cannot read input_image {config.input_image}: {exc}") from exc
    result = difference_scaling_experiment(config, image)
    out.image("image", result.image)
    out.raw("tilts.f32", result.tilts)
    return result


RUNNERS = {
    "point_grid": _run_point_grid,
    "natural": _run_natural,
    "matrix_oracle": _run_matrix_oracle,
    "difference_scaling": _run_difference_scaling,
}


def run_experiment(config: ExperimentConfig) -> int:
    """Run ``config``'s experiment, write its artifacts and manifest, return the exit status."""
    root = Path(config.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    out = _Outputs(root)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = RUNNERS[config.experiment](config, out)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out.add(root / "config.txt")
    (root / "config.txt").write_text(dump_config(config))
    summary = result.summary()
    checks = result.checks()
    out.add(write_key_values(root / "summary.txt", list(summary.items()) + list(checks.items())))
    scene = getattr(result, "scene", None)
    if scene is not None:
        out.add(*save_kernels(root / "kernels.f32", scene.psfs))
        if config.experiment != "difference_scaling":
            out.raw("tilts.f32", scene.tilts.values)
        out.add(write_variance_table(root / "modal_variances.txt", _variance_items(scene)))
    header = [("experiment", config.experiment), ("seed", config.seed), ("version", __version__)]
    header += [(f"config.{k}", v) for k, v in config.items()]
    header += [(f"metric.{k}", v) for k, v in summary.items()]
    header += list(checks.items())
    header.append(("status", "ok" if all(checks.values()) else "invariant_failure"))
    write_manifest(root / "manifest.txt", header, out.files)
    for name, ok in checks.items():
        print(f"{name}: {'true' if ok else 'false'}")
    failed = [name for name, ok in checks.items() if not ok]
    if failed:
        print(f"invariant failure: {', '.join(failed)}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def _cmd_run(args) -> int:
    config = load_config(args.config)
    try:
        return run_experiment(config)
    except ValueError as exc:
        # settings that parse but cannot be honored, e.g. spots closer than a kernel
        raise ConfigError(str(exc)) from exc


def _cmd_validate(args) -> int:
    config = load_config(args.config)
    sys.stdout.write(dump_config(config))
    return EXIT_OK


def _cmd_oracle(args) -> int:
    if args.size < 2 or args.trials < 1:
        raise ConfigError("--size must be >= 2 and --trials >= 1")
    config = ExperimentConfig(
        experiment="matrix_oracle",
        output_dir=args.output_dir or ".",
        seed=args.seed,
        oracle_size=args.size,
        oracle_trials=args.trials,
    )
    try:
        if args.output_dir:
            return run_experiment(config)
        result = matrix_oracle_experiment(config)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for key, value in result.summary().items():
        print(f"{key}: {value}")
    checks = result.checks()
    for name, ok in checks.items():
        print(f"{name}: {'true' if ok else 'false'}")
    return EXIT_OK if all(checks.values()) else EXIT_INVARIANT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="turbforward", description="Tilt and blur orderings of the turbulence forward model."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment described by a config file")
    run.add_argument("config")
    run.set_defaults(func=_cmd_run)
    validate = sub.add_parser("validate", help="check a config file and print it with defaults filled in")
    validate.add_argument("config")
    validate.set_defaults(func=_cmd_validate)
    oracle = sub.add_parser("oracle", help="compare the image-space operators against dense matrices")
    oracle.add_argument("--size", type=int, default=16, help="largest 2-D side (1-D signals up to 4x, max 64)")
    oracle.add_argument("--seed", type=int, default=0)
    oracle.add_argument("--trials", type=int, default=100)
    oracle.add_argument("--output-dir", default=None, help="write artifacts and a manifest here")
    oracle.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
