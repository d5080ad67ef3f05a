"""Command line entry point.

Every successful command prints exactly one JSON line on stdout; diagnostics
go to stderr. Exit codes: 0 ok, 1 I/O error, 2 invalid input, 3 solver did
not converge (output still written), 4 augmentation wrote nothing.
"""

from __future__ import annotations

import functools
import json
import sys

import click

from . import dataset_io
from .errors import NotConverged, ValidationError
from .pipeline import AugmentConfig, DirectorySink, augment_dataset, extract_roi, seam_score
from .solver import DEFAULT_TOL, harmonic_fill, seamless_clone, shifted_region

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_NOT_CONVERGED = 3
EXIT_EMPTY_RUN = 4


def _emit(payload: dict) -> None:
    click.echo(json.dumps(payload))


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
        except OSError as exc:
            click.echo(f"error: I/O: {exc}", err=True)
            sys.exit(EXIT_IO)

    return wrapper


def _int_pair(ctx, param, value):
    if value is None:
        return None
    try:
        a, b = (int(v) for v in value.split(","))
    except ValueError:
        raise click.BadParameter("expected two integers as 'a,b'")
    return a, b


def _float_pair(ctx, param, value):
    try:
        a, b = (float(v) for v in value.split(","))
    except ValueError:
        raise click.BadParameter("expected two numbers as 'lo,hi'")
    if not 0 < a <= b:
        raise click.BadParameter("need 0 < lo <= hi")
    return a, b


def _solver_options(fn):
    fn = click.option(
        "--max-iter", type=click.IntRange(min=1), default=None,
        help="Iteration cap for the solver. [default: 10 x region size, at most 100000]",
    )(fn)
    fn = click.option(
        "--tol", type=click.FloatRange(min=0, min_open=True), default=DEFAULT_TOL, show_default=True,
        help="Relative residual tolerance ||Ax-b||/||b||.",
    )(fn)
    return fn


_mode_option = click.option(
    "--mode", type=click.Choice(["seamless", "direct"]), default="seamless", show_default=True,
    help="seamless: Poisson blend; direct: copy pixels verbatim.",
)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def cli():
    """Copy-paste augmentation with Poisson (gradient-domain) blending."""


@cli.command()
@click.option("--source", required=True, type=click.Path(dir_okay=False), help="Source image (8-bit gray PNG/PGM).")
@click.option("--source-mask", required=True, type=click.Path(dir_okay=False), help="Mask of the region to copy, same size as the source.")
@click.option("--target", required=True, type=click.Path(dir_okay=False), help="Background image to paste into.")
@click.option("--offset", required=True, callback=_int_pair, metavar="DX,DY",
              help="Target position of the ROI crop's top-left pixel. The crop is the mask bounding box grown by 1 pixel, so the crop's source position reproduces the original location.")
@_mode_option
@_solver_options
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output PNG path.")
@_guarded
def blend(source, source_mask, target, offset, mode, tol, max_iter, out):
    """Paste one masked region from SOURCE into TARGET."""
    src = dataset_io.load_image(source)
    msk = dataset_io.load_mask(source_mask, src.shape)
    tgt = dataset_io.load_image(target)
    patch = extract_roi(src, msk)
    omega = shifted_region(tgt.shape, patch.mask, offset)

    report = None
    if mode == "seamless":
        image, report = seamless_clone(tgt, patch, offset, tol, max_iter)
    else:
        image = tgt.copy()
        image[omega] = patch.values[patch.mask]
    dataset_io.save_image(image, out)

    payload = {
        "command": "blend",
        "mode": mode,
        "out": str(out),
        "region_pixels": int(omega.sum()),
        "roi_origin": list(patch.origin),
        "iterations": report.iterations if report else None,
        "relative_residual": report.relative_residual if report else None,
        "converged": report.converged if report else None,
        "seam_score": seam_score(image, omega),
    }
    _emit(payload)
    if report is not None and not report.converged:
        click.echo("warning: solver did not converge; best iterate written", err=True)
        sys.exit(EXIT_NOT_CONVERGED)


@cli.command()
@click.option("--target", required=True, type=click.Path(dir_okay=False), help="Image to fill.")
@click.option("--mask", required=True, type=click.Path(dir_okay=False), help="Region to replace by the smooth interpolant.")
@_solver_options
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output PNG path.")
@_guarded
def fill(target, mask, tol, max_iter, out):
    """Replace the masked region by the harmonic (membrane) interpolant."""
    tgt = dataset_io.load_image(target)
    region = dataset_io.load_mask(mask, tgt.shape)
    exit_code = EXIT_OK
    try:
        image = harmonic_fill(tgt, region, tol, max_iter)
        report = None
    except NotConverged as exc:
        image, report = exc.result, exc.report
        exit_code = EXIT_NOT_CONVERGED
    dataset_io.save_image(image, out)
    payload = {
        "command": "fill",
        "out": str(out),
        "region_pixels": int(region.sum()),
        "converged": exit_code == EXIT_OK,
        "seam_score": seam_score(image, region),
    }
    if report is not None:
        payload.update(iterations=report.iterations, relative_residual=report.relative_residual)
    _emit(payload)
    if exit_code:
        click.echo("warning: solver did not converge; best iterate written", err=True)
        sys.exit(exit_code)


@cli.command()
@click.option("--manifest", required=True, type=click.Path(dir_okay=False), help="Input dataset manifest (JSON).")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False), help="Directory for images/, masks/ and manifest.json.")
@click.option("--count", type=click.IntRange(min=0), default=1, show_default=True, help="Number of samples requested.")
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True, help="Master seed; sample i uses a stream derived from (seed, i).")
@_mode_option
@click.option("--scale", default="0.8,1.25", show_default=True, callback=_float_pair, metavar="LO,HI", help="Uniform scale range.")
@click.option("--rotate", type=click.FloatRange(min=0), default=25.0, show_default=True, help="Rotation drawn uniformly from [-deg, +deg].")
@click.option("--flip-prob", type=click.FloatRange(0, 1), default=0.5, show_default=True, help="Probability of a horizontal flip.")
@click.option("--overlap", type=click.Choice(["reject", "occlude"]), default="reject", show_default=True,
              help="reject: pasted region may not touch existing instances; occlude: it covers them.")
@click.option("--retries", type=click.IntRange(min=1), default=64, show_default=True, help="Placement attempts before a sample is skipped.")
@_solver_options
@_guarded
def augment(manifest, out_dir, count, seed, mode, scale, rotate, flip_prob, overlap, retries, tol, max_iter):
    """Generate COUNT augmented samples from a dataset manifest."""
    config = AugmentConfig(
        scale_range=scale, rotation_range=rotate, flip_prob=flip_prob, mode=mode,
        overlap=overlap, max_retries=retries, tol=tol, max_iter=max_iter, seed=seed, count=count,
    )
    dataset = dataset_io.load_manifest(manifest)
    sink = DirectorySink(out_dir)
    summary = augment_dataset(dataset, config, sink)
    for reason, n in sorted(summary.skipped.items()):
        click.echo(f"skipped {n} sample(s): {reason}", err=True)
    payload = {"command": "augment", "out_dir": str(out_dir), **summary.to_dict()}
    _emit(payload)
    if summary.written == 0:
        click.echo("error: no samples written", err=True)
        sys.exit(EXIT_EMPTY_RUN)


@cli.command()
@click.option("--image", required=True, type=click.Path(dir_okay=False), help="Image to measure.")
@click.option("--mask", required=True, type=click.Path(dir_okay=False), help="Region whose outer edge is measured.")
@_guarded
def seam(image, mask):
    """Mean absolute intensity jump across the mask boundary."""
    img = dataset_io.load_image(image)
    region = dataset_io.load_mask(mask, img.shape)
    _emit({"command": "seam", "seam_score": seam_score(img, region)})


def main(argv=None):
    cli.main(args=argv, prog_name="poissonpaste")


if __name__ == "__main__":
    main()
