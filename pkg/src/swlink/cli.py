"""Batch command-line front end.

Subcommands cover the full pipeline: synthesize oracle inputs, decompose
near-field recordings, assemble channel archives, optimize excitations,
evaluate links, and compute KPIs.  All outputs are deterministic for
identical inputs and seeds; figures are opt-in via ``--figures``.

Exit codes: 0 success, 2 parse/validation error, 3 numerical singularity.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from typing import Sequence

import numpy as np

from . import fileio, report
from .decompose import (
    CoefficientRole,
    CoefficientVector,
    SphereGeometry,
    convergence_table,
    extract_coefficients,
)
from .ensemble import (
    DEFAULT_THRESHOLD_DB,
    ScenarioEnsemble,
    apply_calibration,
    calibration_factor,
    evaluate_ensemble,
    kpi_from_cells,
    measurement_stats,
)
from .errors import (
    IncompleteShellError,
    InconsistentGridsError,
    MissingColumnError,
    SingularityError,
    SwlinkError,
    ValidationError,
)
from .modes import Medium, far_field_pattern, max_degree
from .network import (
    ChannelKind,
    ChannelMatrix,
    reflection_matrix_from_responses,
    transmit_vector,
)
from .optimize import (
    SUBSPACES,
    dipole_weights,
    global_optimum,
    optimal_excitation,
    subspace_columns,
    subspace_summary,
)
from .synth import (
    cavity_response_surfaces,
    dipole_coefficients,
    mode_response_surfaces,
    scenario_catalog,
    surface_from_coefficients,
)

__all__ = ["main"]

_PATTERN_GRID = (37, 72)  # odd theta count puts a row on the equator


def _medium_for(frequency: float) -> Medium:
    return Medium.free_space(frequency=frequency)


def _print(text: str) -> None:
    sys.stdout.write(text + "\n")


# ---------------------------------------------------------------------------
# decompose


def _cmd_decompose(args: argparse.Namespace) -> int:
    surface = fileio.read_field_surface(args.input)
    medium = _medium_for(surface.frequency)
    origin = np.asarray(args.origin, dtype=float) if args.origin else None
    coefficients = extract_coefficients(
        surface, args.truncation, medium, origin=origin, part=args.part
    )
    _print("shell convergence:")
    _print("  J    ||b'||          delta")
    for trunc, norm, delta in convergence_table(coefficients):
        delta_text = "-" if math.isnan(delta) else f"{delta:.6f}"
        _print(f"  {trunc:<4d} {norm:<15.8e} {delta_text}")
    fileio.write_coefficients(
        coefficients, args.output, surface=fileio.surface_descriptor(surface.geometry)
    )
    _print(f"wrote {args.output}")
    return 0


# ---------------------------------------------------------------------------
# assemble-channel


def _read_response_set(paths: Sequence[str]):
    surfaces = [fileio.read_field_surface(p) for p in paths]
    first = surfaces[0]
    for s, p in zip(surfaces, paths):
        if s.geometry != first.geometry:
            raise InconsistentGridsError(f"{p}: recording grid differs from {paths[0]}")
        if not math.isclose(s.frequency, first.frequency, rel_tol=1e-9):
            raise InconsistentGridsError(f"{p}: frequency differs from {paths[0]}")
    return surfaces


def _require_shell_count(count: int, what: str) -> None:
    try:
        max_degree(count)
    except IncompleteShellError:
        raise MissingColumnError(
            f"{count} {what} do not cover complete shells; need 6, 16, 30, ... files"
        ) from None


def _cmd_assemble(args: argparse.Namespace) -> int:
    _require_shell_count(len(args.responses), "response recordings")
    if args.loop:
        _require_shell_count(len(args.loop), "loop recordings")
    responses = _read_response_set(args.responses)
    medium = _medium_for(responses[0].frequency)
    columns = [
        extract_coefficients(s, args.truncation, medium, part="incoming")
        for s in responses
    ]
    values = np.column_stack([c.values for c in columns])
    rx_center = responses[0].geometry.center
    m21 = ChannelMatrix(
        kind=ChannelKind.TRANSMISSION_EQUIVALENT,
        values=values,
        tx_origin=tuple(args.tx_origin),
        rx_origin=tuple(rx_center),
        frequency=medium.frequency,
    )
    channels = [m21]
    if args.loop:
        loops = _read_response_set(args.loop)
        if not math.isclose(
            loops[0].frequency, responses[0].frequency, rel_tol=1e-9
        ):
            raise InconsistentGridsError("loop recordings use a different frequency")
        bhats = [
            extract_coefficients(s, len(args.loop), medium, part="outgoing")
            for s in loops
        ]
        channels.append(reflection_matrix_from_responses(bhats))
    fileio.write_channel_archive(channels, args.output)
    _print(
        f"wrote {args.output}: M'21 {m21.rx_truncation}x{m21.tx_truncation}"
        + (", M11" if args.loop else "")
    )
    return 0


# ---------------------------------------------------------------------------
# optimize


def _load_scenarios(paths: Sequence[str]) -> tuple[list[ChannelMatrix], list[float] | None]:
    channels: list[ChannelMatrix] = []
    weights: list[float] = []
    ensembles_only = True
    for path in paths:
        payload = fileio.read_archive(path)
        if isinstance(payload, ScenarioEnsemble):
            for e in payload.entries:
                channels.append(e.m21)
                weights.append(e.weight)
        else:
            ensembles_only = False
            for ch in payload:
                if ch.kind is ChannelKind.REFLECTION:
                    continue  # reflection blocks are not transmission scenarios
                channels.append(ch)
    if not channels:
        raise ValidationError("archives contain no transmission channels")
    if ensembles_only and len(paths) >= 1:
        total = sum(weights)
        return channels, [w / total for w in weights]
    return channels, None


def _cmd_optimize(args: argparse.Namespace) -> int:
    channels, archive_weights = _load_scenarios(args.archives)
    if args.weights is not None:
        weights = [float(tok) for tok in args.weights.split(",")]
        if len(weights) != len(channels):
            raise ValidationError(
                f"{len(weights)} weights for {len(channels)} scenarios"
            )
    elif archive_weights is not None:
        weights = archive_weights
    else:
        weights = [1.0 / len(channels)] * len(channels)

    optima = [optimal_excitation(ch, args.subspace) for ch in channels]
    best = global_optimum(optima, weights)

    lam_path = f"{args.output_prefix}-lambda.tsv"
    lines = ["scenario\tlambda_max\tsingular_value"]
    for i, o in enumerate(optima):
        tag = o.scenario_tag or f"ch{i:04d}"
        lines.append(f"{tag}\t{o.lambda_max!r}\t{o.singular_value!r}")
    fileio.atomic_write_text(lam_path, "\n".join(lines) + "\n")

    opt_path = f"{args.output_prefix}-optimum.swfcv"
    fileio.write_coefficients(best, opt_path)

    dw = dipole_weights(best)
    dip_path = f"{args.output_prefix}-dipoles.tsv"
    lines = ["axis\tre_magnetic\tim_magnetic\tre_electric\tim_electric"]
    for i, axis in enumerate(("x", "y", "z")):
        lines.append(
            f"{axis}\t{float(dw.magnetic[i].real)!r}\t{float(dw.magnetic[i].imag)!r}"
            f"\t{float(dw.electric[i].real)!r}\t{float(dw.electric[i].imag)!r}"
        )
    fileio.atomic_write_text(dip_path, "\n".join(lines) + "\n")

    medium = _medium_for(best.frequency)
    pattern = far_field_pattern(
        best.values, medium, 0.5, n_theta=_PATTERN_GRID[0], n_phi=_PATTERN_GRID[1]
    )
    pat_path = f"{args.output_prefix}-pattern.tsv"
    lines = ["theta_deg\tphi_deg\tgain_dbi"]
    for i, th in enumerate(pattern.theta):
        for j, ph in enumerate(pattern.phi):
            lines.append(
                f"{math.degrees(th)!r}\t{math.degrees(ph)!r}"
                f"\t{float(pattern.gain_dbi[i, j])!r}"
            )
    fileio.atomic_write_text(pat_path, "\n".join(lines) + "\n")

    summary = subspace_summary(optima)
    _print(f"scenarios: {len(optima)}  subspace: {args.subspace}")
    _print(f"mean lambda_max: {summary['mean_lambda_max']:.6e}")
    _print(f"mean singular value: {summary['mean_singular_value']:.6e}")
    _print(f"global optimum peak gain: {pattern.peak_gain_dbi:.2f} dBi")
    if args.subspace == "full":
        te = np.linalg.norm(best.values[subspace_columns(best.truncation, "te")])
        tm = np.linalg.norm(best.values[subspace_columns(best.truncation, "tm")])
        if min(te, tm) ** 2 > 0.05:
            _print(
                "note: optimum mixes TE and TM content (hard to realize "
                "with a single-polarization antenna)"
            )
    _print(f"wrote {lam_path}, {opt_path}, {dip_path}, {pat_path}")

    if args.figures:
        os.makedirs(args.figures, exist_ok=True)
        report.lambda_bar_figure(optima, os.path.join(args.figures, "lambda_max.png"))
        report.pattern_cut_figure(
            pattern, os.path.join(args.figures, "optimum_pattern.png")
        )
        _print(f"figures in {args.figures}")
    return 0


# ---------------------------------------------------------------------------
# link and kpi


def _cmd_link(args: argparse.Namespace) -> int:
    payload = fileio.read_archive(args.ensemble)
    if not isinstance(payload, ScenarioEnsemble):
        raise ValidationError(
            f"{args.ensemble} holds bare channels; link evaluation needs an ensemble"
        )
    antenna = fileio.read_coefficients(args.antenna)
    if antenna.role is CoefficientRole.TRANSMIT:
        t = antenna
    else:
        p_a = antenna.accepted_power
        if p_a is None:
            p_a = 0.5 * antenna.norm**2  # lossless free-space default
        t = transmit_vector(antenna, p_a)
    link_report = evaluate_ensemble(
        payload, t, threshold_db=args.threshold_db, db_average=args.db_average
    )
    links_path = f"{args.output_prefix}-links.tsv"
    cells_path = f"{args.output_prefix}-cells.tsv"
    fileio.write_link_table(link_report, links_path)
    fileio.write_cell_table(link_report, cells_path)
    _print(
        fileio.format_kpi(
            link_report.kpi_fraction,
            link_report.kpi_count,
            link_report.threshold_db,
            len(link_report.cells),
        )
    )
    _print(f"wrote {links_path}, {cells_path}")
    if args.figures:
        os.makedirs(args.figures, exist_ok=True)
        report.pose_curve_figure(
            link_report, os.path.join(args.figures, "pose_curves.png")
        )
        _print(f"figures in {args.figures}")
    return 0


def _cmd_kpi(args: argparse.Namespace) -> int:
    for path in args.cells:
        cells = fileio.read_cell_table(path)
        fraction, count = kpi_from_cells(cells, args.threshold_db)
        _print(
            f"{path}: "
            + fileio.format_kpi(fraction, count, args.threshold_db, len(cells))
        )
    return 0


# ---------------------------------------------------------------------------
# calibrate


def _cmd_calibrate(args: argparse.Namespace) -> int:
    records = fileio.read_measurements(args.measurements)
    cells = fileio.read_cell_table(args.simulated)
    measured_avg = float(np.mean([10.0 ** (r.rssi_db / 20.0) for r in records]))
    simulated_avg = float(np.mean([10.0 ** (c.magnitude_db / 20.0) for c in cells]))
    factor = calibration_factor(simulated_avg, measured_avg)
    offset_db = 20.0 * math.log10(factor)
    _print(f"calibration factor: {factor:.6e} ({offset_db:+.2f} dB)")
    subjects: dict[str, list[float]] = {}
    for r in records:
        subjects.setdefault(r.subject, []).append(r.rssi_db)
    stats = {}
    _print("subject  n    median     q1         q3")
    for subject in sorted(subjects):
        calibrated = apply_calibration(subjects[subject], factor)
        s = measurement_stats(calibrated)
        stats[subject] = s
        _print(
            f"{subject:<8s} {s.n:<4d} {s.median:<10.2f} {s.q1:<10.2f} {s.q3:<10.2f}"
        )
    if args.figures:
        os.makedirs(args.figures, exist_ok=True)
        report.measurement_box_figure(
            stats, os.path.join(args.figures, "measurements.png")
        )
        _print(f"figures in {args.figures}")
    return 0


# ---------------------------------------------------------------------------
# synth


def _cmd_synth_catalog(args: argparse.Namespace) -> int:
    ensemble = scenario_catalog(
        args.seed,
        n_anatomy=args.anatomies,
        n_pose=args.poses,
        n_rx=args.rx,
        medium=_medium_for(args.frequency),
        tx_truncation=args.truncation,
    )
    fileio.write_ensemble_archive(ensemble, args.output)
    _print(f"wrote {args.output}: {len(ensemble)} scenarios")
    return 0


def _cmd_synth_radiator(args: argparse.Namespace) -> int:
    medium = _medium_for(args.frequency)
    lam = 2.0 * math.pi / medium.k
    radius = args.radius if args.radius is not None else lam
    geometry = SphereGeometry(
        center=(0.0, 0.0, 0.0),
        radius=radius,
        n_theta=args.grid[0],
        n_phi=args.grid[1],
    )
    b = dipole_coefficients(args.kind, args.axis, medium)
    offset = tuple(args.offset) if args.offset else None
    surface = surface_from_coefficients(b, geometry, medium, source_center=offset)
    fileio.write_field_surface(surface, args.output)
    _print(f"wrote {args.output}: {surface.points.shape[0]} samples")
    return 0


def _cmd_synth_responses(args: argparse.Namespace) -> int:
    medium = _medium_for(args.frequency)
    os.makedirs(args.output_dir, exist_ok=True)
    if args.cavity_radius is not None:
        geometry = SphereGeometry(
            center=(0.0, 0.0, 0.0),
            radius=args.record_radius,
            n_theta=args.grid[0],
            n_phi=args.grid[1],
        )
        surfaces = cavity_response_surfaces(
            args.cavity_radius, geometry, args.truncation, medium
        )
        stem = "loop"
    else:
        if args.rx_center is None:
            raise ValidationError("free-space responses need --rx-center")
        geometry = SphereGeometry(
            center=tuple(args.rx_center),
            radius=args.record_radius,
            n_theta=args.grid[0],
            n_phi=args.grid[1],
        )
        surfaces = mode_response_surfaces(
            (0.0, 0.0, 0.0), geometry, args.truncation, medium
        )
        stem = "mode"
    paths = []
    for i, surface in enumerate(surfaces, start=1):
        path = os.path.join(args.output_dir, f"{stem}{i:02d}.nf")
        fileio.write_field_surface(surface, path)
        paths.append(path)
    _print(f"wrote {len(paths)} recordings to {args.output_dir}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common_figures(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--figures",
        metavar="DIR",
        help="render figures into DIR alongside the tables",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swlink",
        description="spherical-wave link analysis: de-embedding, channels, optimization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="extract mode coefficients from a near-field file")
    p.add_argument("input", help="SWFNF near-field file")
    p.add_argument("-o", "--output", required=True, help="SWFCV output path")
    p.add_argument("--truncation", type=int, default=30)
    p.add_argument("--origin", type=float, nargs=3, metavar=("X", "Y", "Z"))
    p.add_argument(
        "--part",
        choices=("difference", "outgoing", "incoming"),
        default="difference",
    )
    p.set_defaults(func=_cmd_decompose)

    p = sub.add_parser("assemble-channel", help="build a channel archive from recordings")
    p.add_argument("--responses", nargs="+", required=True, metavar="NF",
                   help="per-excited-mode receiver recordings, in mode order")
    p.add_argument("--loop", nargs="+", metavar="NF",
                   help="per-excited-mode transmitter-side total-field recordings")
    p.add_argument("-o", "--output", required=True, help="SWFCA output path")
    p.add_argument("--truncation", type=int, default=6, help="receiver-side truncation")
    p.add_argument("--tx-origin", type=float, nargs=3, default=(0.0, 0.0, 0.0),
                   metavar=("X", "Y", "Z"))
    p.set_defaults(func=_cmd_assemble)

    p = sub.add_parser("optimize", help="optimal excitations for stored channels")
    p.add_argument("archives", nargs="+", help="SWFCA channel/ensemble archives")
    p.add_argument("-o", "--output-prefix", required=True)
    p.add_argument("--subspace", choices=SUBSPACES, default="full")
    p.add_argument("--weights", help="comma-separated scenario weights (default: stored/uniform)")
    _add_common_figures(p)
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("link", help="embed an antenna into an ensemble and report S21")
    p.add_argument("--antenna", required=True, help="SWFCV coefficient file (b' or T')")
    p.add_argument("--ensemble", required=True, help="SWFCA ensemble archive")
    p.add_argument("-o", "--output-prefix", required=True)
    p.add_argument("--threshold-db", type=float, default=DEFAULT_THRESHOLD_DB)
    p.add_argument("--db-average", action="store_true",
                   help="average cells in dB instead of linear magnitude")
    _add_common_figures(p)
    p.set_defaults(func=_cmd_link)

    p = sub.add_parser("kpi", help="connection-loss KPI of stored cell tables")
    p.add_argument("cells", nargs="+", help="cell tables from `swlink link`")
    p.add_argument("--threshold-db", type=float, default=DEFAULT_THRESHOLD_DB)
    p.set_defaults(func=_cmd_kpi)

    p = sub.add_parser("calibrate", help="calibrate measured RSSI against simulated cells")
    p.add_argument("--measurements", required=True, help="CSV: subject,pose,rx,rssi_db")
    p.add_argument("--simulated", required=True, help="cell table from `swlink link`")
    _add_common_figures(p)
    p.set_defaults(func=_cmd_calibrate)

    p_synth = sub.add_parser("synth", help="generate analytic oracle inputs")
    synth_sub = p_synth.add_subparsers(dest="synth_command", required=True)

    p = synth_sub.add_parser("catalog", help="deterministic scenario ensemble")
    p.add_argument("-o", "--output", required=True, help="SWFCA output path")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--anatomies", type=int, default=3)
    p.add_argument("--poses", type=int, default=5)
    p.add_argument("--rx", type=int, default=4)
    p.add_argument("--frequency", type=float, default=2.45e9)
    p.add_argument("--truncation", type=int, default=6)
    p.set_defaults(func=_cmd_synth_catalog)

    p = synth_sub.add_parser("radiator", help="near-field recording of a test dipole")
    p.add_argument("-o", "--output", required=True, help="SWFNF output path")
    p.add_argument("--kind", choices=("magnetic", "electric"), default="magnetic")
    p.add_argument("--axis", choices=("x", "y", "z"), default="z")
    p.add_argument("--frequency", type=float, default=2.45e9)
    p.add_argument("--radius", type=float, help="recording sphere radius in m (default: one wavelength)")
    p.add_argument("--grid", type=int, nargs=2, default=(32, 64), metavar=("NTHETA", "NPHI"))
    p.add_argument("--offset", type=float, nargs=3, metavar=("X", "Y", "Z"),
                   help="displace the source from the expansion origin")
    p.set_defaults(func=_cmd_synth_radiator)

    p = synth_sub.add_parser("responses", help="per-mode recordings for channel assembly")
    p.add_argument("-o", "--output-dir", required=True)
    p.add_argument("--truncation", type=int, default=6, help="excited tx mode count")
    p.add_argument("--frequency", type=float, default=2.45e9)
    p.add_argument("--rx-center", type=float, nargs=3, metavar=("X", "Y", "Z"))
    p.add_argument("--record-radius", type=float, required=True)
    p.add_argument("--grid", type=int, nargs=2, default=(12, 24), metavar=("NTHETA", "NPHI"))
    p.add_argument("--cavity-radius", type=float,
                   help="record inside a PEC cavity of this radius instead of free space")
    p.set_defaults(func=_cmd_synth_responses)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SingularityError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 3
    except SwlinkError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
