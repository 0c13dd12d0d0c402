"""Command-line interface for graph wavelet decomposition and restoration."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from perceptual_wavelets.config import (
    DistanceMode,
    GraphParams,
    RunConfig,
    TransformParams,
)
from perceptual_wavelets.imageio import (
    add_gaussian_noise,
    dump_stem,
    read_image,
    read_mask,
    write_coefficient_dump,
    write_image,
)
from perceptual_wavelets.imggraph import (
    GraphConstructionError,
    build_weighted_graph,
    laplacian,
    pixel_features,
    write_edge_list,
)
from perceptual_wavelets.report import ImageInfo, RestorationReport, report_json_schema_text
from perceptual_wavelets.restore import (
    channel_reports,
    denoise,
    graph_info,
    inpaint,
    noise_sweep,
)
from perceptual_wavelets.sgwt import TransformError, WaveletTransform, forward_image
from perceptual_wavelets.spectral import BasisTooLargeError, SpectralError


LOGGER = logging.getLogger("perceptual_wavelets.cli")

EXIT_OK = 0
EXIT_IO = 1
EXIT_PARAMS = 2
EXIT_NUMERICAL = 3
EXIT_INTERRUPTED = 130


def _shared_options() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("input", type=Path, help="Input image (PNG or binary PPM).")
    graph = shared.add_argument_group("graph")
    graph.add_argument("--sigma", type=float, help="Gaussian width of the edge weights (default 10).")
    graph.add_argument("--knn", type=int, help="Nearest neighbors per pixel (default 8).")
    graph.add_argument("--geo-budget", type=int, help="Geodesic neighbors per pixel (default 4 * knn).")
    graph.add_argument(
        "--distance",
        choices=[mode.value for mode in DistanceMode],
        help="Color term of the k-NN distance (default ed).",
    )
    graph.add_argument("--graph-image", type=Path, help="Build the graph from this image instead.")
    graph.add_argument("--graph-dump", type=Path, help="Write the graph edge list to this path.")
    transform = shared.add_argument_group("transform")
    transform.add_argument("--scales", type=int, help="Number of wavelet scales J (default 3).")
    transform.add_argument("--cheby-order", type=int, help="Chebyshev order M (default 50).")
    transform.add_argument(
        "--exact",
        action="store_true",
        help="Use the full eigendecomposition instead of the Chebyshev approximation.",
    )
    restore = shared.add_argument_group("restoration")
    restore.add_argument("--smooth-sigma", type=float, help="Pre-smoothing width in pixels (default 2).")
    restore.add_argument(
        "--no-smooth",
        action="store_true",
        help="Build the denoising graph on the noisy image itself.",
    )
    restore.add_argument("--threshold-mult", type=float, help="Threshold multiplier (default 3).")
    restore.add_argument("--iterations", type=int, help="Inpainting iterations (default 30).")
    restore.add_argument(
        "--schedule",
        choices=["decay", "fixed"],
        help="Inpainting threshold schedule (default decay).",
    )
    restore.add_argument("--mask", type=Path, help="Mask image: white known, black missing.")
    restore.add_argument("--ref", type=Path, help="Clean reference image for quality metrics.")
    restore.add_argument("--add-noise", type=float, metavar="STD", help="Add Gaussian noise first.")
    restore.add_argument(
        "--noise-levels",
        type=float,
        nargs="+",
        metavar="STD",
        help="Noise standard deviations for sweep (default 2 5 10 20).",
    )
    restore.add_argument("--seed", type=int, help="Seed of the noise simulator (default 0).")
    output = shared.add_argument_group("output")
    output.add_argument("--out", type=Path, help="Output image or coefficient dump prefix.")
    output.add_argument("--report", type=Path, help="Write the JSON report here instead of stdout.")
    output.add_argument("--threads", type=int, help="Worker threads (default: CPU count).")
    output.add_argument(
        "--verbose",
        action="store_true",
        help="Enable verbose logging to stderr for troubleshooting.",
    )
    return shared


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        description="Graph wavelet analysis, denoising and inpainting of color images."
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    shared = _shared_options()
    subparsers.add_parser(
        "decompose", parents=[shared], help="Write per-scale coefficient planes and quadratic forms."
    )
    subparsers.add_parser("analyze", parents=[shared], help="Report graph statistics and quadratic forms.")
    subparsers.add_parser("denoise", parents=[shared], help="Graph wavelet denoising.")
    subparsers.add_parser("inpaint", parents=[shared], help="Graph wavelet inpainting.")
    subparsers.add_parser("sweep", parents=[shared], help="Denoising quality over noise levels.")
    schema = subparsers.add_parser("schema", help="Print or write the JSON schema of the reports.")
    schema.add_argument("--out", type=Path, help="Write the schema to this file instead of stdout.")
    schema.add_argument("--verbose", action="store_true", help=argparse.SUPPRESS)
    return parser.parse_args(argv)


def _given(**values: Any) -> Dict[str, Any]:
    return {key: value for key, value in values.items() if value is not None}


def build_config(args: argparse.Namespace) -> RunConfig:
    graph = GraphParams(
        **_given(k=args.knn, sigma=args.sigma, geodesic_budget=args.geo_budget, mode=args.distance)
    )
    transform = TransformParams(
        **_given(scales=args.scales, chebyshev_order=args.cheby_order), exact=args.exact
    )
    return RunConfig(
        command=args.command,
        input_path=args.input,
        graph=graph,
        transform=transform,
        no_smooth=args.no_smooth,
        **_given(
            out_path=args.out,
            report_path=args.report,
            smooth_sigma=args.smooth_sigma,
            threshold_multiplier=args.threshold_mult,
            iterations=args.iterations,
            schedule=args.schedule,
            mask_path=args.mask,
            reference_path=args.ref,
            graph_image_path=args.graph_image,
            graph_dump_path=args.graph_dump,
            add_noise=args.add_noise,
            noise_levels=tuple(args.noise_levels) if args.noise_levels else None,
            seed=args.seed,
            threads=args.threads,
        ),
    )


def _echo(config: RunConfig) -> Dict[str, Any]:
    # Thread count does not affect results and is left out so reports stay comparable.
    return config.model_dump(mode="json", exclude={"threads"})


def _emit(report: RestorationReport, config: RunConfig) -> None:
    if config.report_path is not None:
        config.report_path.parent.mkdir(parents=True, exist_ok=True)
        report.write(config.report_path)
        LOGGER.info("report written to %s", config.report_path)
    else:
        sys.stdout.write(report.to_json())


def _reference(config: RunConfig, shape) -> Optional[np.ndarray]:
    if config.reference_path is None:
        return None
    reference = read_image(config.reference_path)
    if reference.shape != shape:
        raise ValueError(f"reference image {reference.shape} does not match input {shape}")
    return reference


def _analysis_report(config: RunConfig) -> tuple[RestorationReport, list, tuple[int, int]]:
    image = read_image(config.input_path)
    graph_source = image
    if config.graph_image_path is not None:
        graph_source = read_image(config.graph_image_path)
        if graph_source.shape != image.shape:
            raise GraphConstructionError(
                f"graph image {graph_source.shape} does not match input {image.shape}"
            )
    features = pixel_features(graph_source, config.graph.mode)
    graph = build_weighted_graph(features, config.graph, threads=config.threads)
    if config.graph_dump_path is not None:
        write_edge_list(graph, config.graph_dump_path)
        LOGGER.info("edge list written to %s", config.graph_dump_path)
    L = laplacian(graph)
    transform = WaveletTransform.from_params(L, config.transform)
    coeffs = forward_image(image, transform, threads=config.threads)
    channels, q_tau_mean, q_mean = channel_reports(
        [image[..., c].ravel() for c in range(3)], coeffs, L
    )
    height, width = image.shape[:2]
    source = str(config.graph_image_path) if config.graph_image_path is not None else None
    report = RestorationReport(
        command=config.command,
        parameters=_echo(config),
        image=ImageInfo(width=width, height=height),
        graph=graph_info(graph, transform, config.graph.mode.value, source=source),
        channels=channels,
        q_tau_mean=q_tau_mean,
        q_mean=q_mean,
    )
    return report, coeffs, (height, width)


def cmd_decompose(config: RunConfig) -> int:
    report, coeffs, shape = _analysis_report(config)
    write_coefficient_dump(dump_stem(config.out_path), coeffs, shape)
    _emit(report, config)
    return EXIT_OK


def cmd_analyze(config: RunConfig) -> int:
    report, _, _ = _analysis_report(config)
    _emit(report, config)
    return EXIT_OK


def cmd_denoise(config: RunConfig) -> int:
    image = read_image(config.input_path)
    reference = _reference(config, image.shape)
    if config.add_noise is not None:
        if reference is None:
            reference = image
        image = add_gaussian_noise(image, config.add_noise, config.seed)
        noisy_path = config.out_path.with_name(f"{config.out_path.stem}_noisy.png")
        write_image(noisy_path, image)
        LOGGER.info("noisy input written to %s", noisy_path)
    result = denoise(image, config.denoise_params(), reference=reference, threads=config.threads)
    write_image(config.out_path, result.image)
    result.report.parameters = _echo(config)
    _emit(result.report, config)
    return EXIT_OK


def cmd_inpaint(config: RunConfig) -> int:
    image = read_image(config.input_path)
    mask = read_mask(config.mask_path)
    reference = _reference(config, image.shape)
    result = inpaint(image, mask, config.inpaint_params(), reference=reference, threads=config.threads)
    write_image(config.out_path, result.image)
    result.report.parameters = _echo(config)
    _emit(result.report, config)
    return EXIT_OK


def cmd_sweep(config: RunConfig) -> int:
    clean = read_image(config.input_path)
    entries = noise_sweep(
        clean,
        config.noise_levels,
        config.denoise_params(),
        seed=config.seed,
        threads=config.threads,
    )
    height, width = clean.shape[:2]
    report = RestorationReport(
        command="sweep",
        parameters=_echo(config),
        image=ImageInfo(width=width, height=height),
        sweep=entries,
    )
    _emit(report, config)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "decompose": cmd_decompose,
    "analyze": cmd_analyze,
    "denoise": cmd_denoise,
    "inpaint": cmd_inpaint,
    "sweep": cmd_sweep,
}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or EXIT_OK)

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s [%(levelname)s] %(message)s",
    )

    if args.command == "schema":
        text = report_json_schema_text()
        if args.out is None:
            sys.stdout.write(text)
            return EXIT_OK
        try:
            args.out.parent.mkdir(parents=True, exist_ok=True)
            args.out.write_text(text, encoding="utf-8")
        except OSError as exc:
            print(f"I/O error: {exc}", file=sys.stderr)
            return EXIT_IO
        LOGGER.info("schema written to %s", args.out)
        return EXIT_OK

    try:
        config = build_config(args)
        LOGGER.info("running %s on %s", config.command, config.input_path)
        return COMMANDS[config.command](config)
    except KeyboardInterrupt:  # pragma: no cover - manual interruption
        print("Interrupted by user", file=sys.stderr)
        return EXIT_INTERRUPTED
    except ValidationError as exc:
        print(f"Invalid parameters: {exc}", file=sys.stderr)
        return EXIT_PARAMS
    except BasisTooLargeError as exc:
        print(f"Invalid parameters: {exc}", file=sys.stderr)
        return EXIT_PARAMS
    except (TransformError, SpectralError) as exc:
        LOGGER.error("Numerical failure: %s", exc)
        print(f"Numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"Invalid parameters: {exc}", file=sys.stderr)
        return EXIT_PARAMS


__all__ = ["COMMANDS", "build_config", "main", "parse_args"]
