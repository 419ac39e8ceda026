"""Command-line entry point: ``vfdms <subcommand> ...``.

Every subcommand exits 0 on success. Failures print ``error [stage]: ...``
to stderr and exit 1 (2 for usage errors, as argparse does).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__

log = logging.getLogger("vfdms")


class CliError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


def _pair(text: str) -> tuple[int, int]:
    parts = text.replace("x", ",").split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two integers like 64,64, got {text!r}")
    return int(parts[0]), int(parts[1])


def _auto_int(text: str):
    return None if text.lower() == "auto" else int(text)


def _kv(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- subcommands --------------------------------------------------------------


def cmd_simulate_cgle(args) -> None:
    from .io import write_series
    from .sim_cgle import cgle_presets, scalar_series, simulate_cgle

    params = cgle_presets()[args.preset]
    changes = {
        "alpha": args.alpha, "beta": args.beta, "grid": args.grid, "domain_side": args.side, "dt": args.dt,
        "t_end": args.t_end, "output_stride": args.stride, "t_start_output": args.t_start, "seed": args.seed,
    }
    params = dataclasses.replace(params, **{k: v for k, v in changes.items() if v is not None})
    res = simulate_cgle(params)
    series = res.fields if args.field == "complex" else scalar_series(res.fields, args.field)
    out = Path(args.output)
    write_series(series, out)
    _write_json(out / "params.json", {"simulator": "cgle", "field": args.field, "params": params.to_dict()})
    print(f"wrote {len(series)} frames to {out}")


def cmd_simulate_gs(args) -> None:
    from .io import write_series
    from .sim_gray_scott import gs_presets, simulate_gray_scott

    params = gs_presets()[args.preset]
    changes = {
        "mesh_level": args.level, "dt": args.dt, "t_end": args.t_end, "output_stride": args.stride,
        "seed": args.seed, "length_scale": args.length_scale, "imex": args.imex or None,
    }
    params = dataclasses.replace(params, **{k: v for k, v in changes.items() if v is not None})
    res = simulate_gray_scott(params)
    pick = {"u": res.fields.component(0), "v": res.fields.component(1), "uv": res.fields, "u_gradient": res.gradient}
    out = Path(args.output)
    write_series(pick[args.field], out)
    _write_json(out / "params.json", {"simulator": "gray_scott", "field": args.field, "params": params.to_dict()})
    print(f"wrote {len(res.fields)} frames to {out}")


def _read_series(args):
    from .io import load_field_series, load_image_series

    if getattr(args, "images", False):
        return load_image_series(args.input, args.lattice)
    return load_field_series(args.input)


def cmd_gradient(args) -> None:
    from .io import write_series

    series = _read_series(args)
    if series.space.kind != "lattice":
        raise CliError("gradient", "the lattice gradient needs a lattice space")
    write_series(series.gradient(args.boundary), args.output)
    print(f"wrote gradient series to {args.output}")


def cmd_distmat(args) -> None:
    from .field import PQ
    from .metrics import distance_matrix, write_distance_csv, write_distance_matrix

    series = _read_series(args)
    dm = distance_matrix(series, PQ.parse(args.pq), n_jobs=args.jobs)
    write_distance_matrix(dm, args.output)
    if args.csv:
        write_distance_csv(dm, args.csv)
    print(f"{dm.n}x{dm.n} squared distances (pq={dm.pq}) -> {args.output}")


def cmd_mds(args) -> None:
    from .mds import embed, write_coords_csv, write_embedding, write_spectrum_csv
    from .metrics import read_distance_matrix

    e = embed(read_distance_matrix(args.input), eps_keep=args.eps_keep)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_embedding(e, out / "embedding.dmse")
    write_spectrum_csv(e, out / "spectrum.csv")
    write_coords_csv(e, out / "coords.csv", k=args.k)
    print(f"retained {e.k_retained} coordinates, negative mass {e.negative_mass:.3g}")


def cmd_reconstruct(args) -> None:
    from .field import write_field, write_pgm, write_ppm
    from .io import load_field_series
    from .mds import read_embedding
    from .reconstruct import fit, reconstruct_frame, reconstruction_error

    series = load_field_series(args.series)
    e = read_embedding(args.embedding)
    model = fit(series, e, k_max=args.k)
    approx = reconstruct_frame(model, args.frame, args.k)
    err = reconstruction_error(model, args.frame, args.k)
    out = Path(args.output)
    write_field(approx, out)
    if args.image and series.space.kind == "lattice" and approx.rank in (1, 3):
        (write_pgm if approx.rank == 1 else write_ppm)(approx, args.image)
    print(f"frame {args.frame} rank {args.k}: relative error {err:.6g}")


def _load_column(path: str, column: str | None) -> np.ndarray:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise CliError("lyapunov", f"{path}: empty file")
    first = [c.strip() for c in lines[0].split(",")]
    try:
        [float(c) for c in first]
        header, body = None, lines
    except ValueError:
        header, body = first, lines[1:]
    rows = np.array([[float(c) for c in ln.split(",")] for ln in body])
    if rows.ndim == 1:
        rows = rows[:, None]
    if column is None:
        idx = 1 if rows.shape[1] > 1 else 0
    elif header is not None and column in header:
        idx = header.index(column)
    else:
        try:
            idx = int(column)
        except ValueError:
            raise CliError("lyapunov", f"{path}: no column {column!r}") from None
    return rows[:, idx]


def cmd_lyapunov(args) -> None:
    from .lyapunov import LyapunovConfig, max_lyapunov

    x = _load_column(args.input, args.column)
    cfg = LyapunovConfig(
        embed_dim=args.embed_dim,
        delay=args.delay,
        theiler_window=args.theiler,
        fit_range=args.fit_range,
        sample_time=args.sample_time,
    )
    r = max_lyapunov(x, cfg)
    if args.output:
        np.savetxt(
            args.output,
            np.column_stack([r.steps, r.divergence]),
            delimiter=",",
            fmt=["%d", "%.17g"],
            header="step,mean_log_separation",
            comments="",
        )
    print(f"lambda_per_sample,{r.exponent!r}")
    print(f"lambda_per_time,{r.exponent_per_time!r}")
    print(f"r_squared,{r.r_squared!r}")
    print(f"fit_range,{r.fit_range[0]}-{r.fit_range[1]}")
    print(f"delay,{r.delay}")
    print(f"theiler_window,{r.theiler_window}")
    print(f"embed_dim,{r.embed_dim}")


def cmd_mesh(args) -> None:
    from .measure_space import icosphere, mesh_space, write_off, write_space_csv

    mesh = icosphere(args.radius, args.level)
    write_off(mesh, args.output)
    if args.weights:
        write_space_csv(mesh_space(mesh), args.weights)
    print(f"icosphere level {args.level}: {mesh.n_vertices} vertices, {mesh.n_faces} faces -> {args.output}")


def _pipeline_config(args):
    from .pipeline import PipelineConfig, _override_value, load_config

    if args.manifest:
        base = PipelineConfig.from_manifest(args.manifest, args.output or "").to_dict()
    elif args.config:
        base = load_config(args.config)
    else:
        base = {}
    flags = {
        "output_dir": args.output, "source": args.source, "preset": args.preset, "input_dir": args.input_dir,
        "lattice": args.lattice, "field": args.field, "pq": args.pq, "gradient": args.gradient, "k": args.k,
        "lyapunov": args.lyapunov, "embed_dim": args.embed_dim, "delay": args.delay, "n_jobs": args.jobs,
        "figures": args.figures, "save_series": args.save_series, "overwrite": args.overwrite or None,
    }
    cfg = dict(base)
    cfg.update({k: v for k, v in flags.items() if v is not None})
    if args.no_reconstruct:
        cfg["k"] = None
    if args.set:
        overrides = dict(cfg.get("overrides", {}))
        overrides.update({k: _override_value(v) for k, v in args.set})
        cfg["overrides"] = overrides
    if not cfg.get("output_dir"):
        raise CliError("config", "an output directory is required (--output or [output] dir)")
    return PipelineConfig.from_dict(cfg)


def cmd_pipeline(args) -> None:
    from .pipeline import PipelineError, run_pipeline

    try:
        cfg = _pipeline_config(args)
    except (ValueError, TypeError) as exc:
        raise CliError("config", str(exc)) from exc
    try:
        m = run_pipeline(cfg)
    except PipelineError as exc:
        raise CliError(exc.stage, str(exc).split("] ", 1)[-1]) from exc
    print(f"pipeline finished: {cfg.output_dir} ({len(m['stages'])} stages)")


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    from .sim_cgle import cgle_presets
    from .sim_gray_scott import gs_presets

    p = argparse.ArgumentParser(prog="vfdms", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log stage progress")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate-cgle", help="run the Ginzburg-Landau simulator")
    s.add_argument("--preset", choices=sorted(cgle_presets()), default="frozen")
    s.add_argument("--alpha", type=float)
    s.add_argument("--beta", type=float)
    s.add_argument("--grid", type=_pair)
    s.add_argument("--side", type=float, help="domain side length")
    s.add_argument("--dt", type=float)
    s.add_argument("--t-end", type=float)
    s.add_argument("--stride", type=float, help="time between output frames")
    s.add_argument("--t-start", type=float, help="first output time")
    s.add_argument("--seed", type=int)
    s.add_argument("--field", choices=("abs", "re", "im", "complex"), default="abs")
    s.add_argument("-o", "--output", "--out", required=True, help="field directory to write")
    s.set_defaults(func=cmd_simulate_cgle)

    s = sub.add_parser("simulate-gs", help="run the Gray-Scott simulator on an icosphere")
    s.add_argument("--preset", choices=sorted(gs_presets()), default="stripes")
    s.add_argument("--level", "--mesh-level", type=int, help="icosphere subdivision level")
    s.add_argument("--dt", type=float)
    s.add_argument("--t-end", type=float)
    s.add_argument("--stride", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--length-scale", type=float)
    s.add_argument("--imex", action="store_true", help="implicit diffusion")
    s.add_argument("--field", choices=("u", "v", "uv", "u_gradient"), default="u")
    s.add_argument("-o", "--output", "--out", required=True)
    s.set_defaults(func=cmd_simulate_gs)

    def series_input(sp):
        sp.add_argument("-i", "--input", required=True, help="field directory or image directory")
        sp.add_argument("--images", action="store_true", help="input is a directory of PGM/PPM files")
        sp.add_argument("--lattice", type=_pair, help="declared image size w,h")

    s = sub.add_parser("gradient", help="lattice gradient of every frame")
    series_input(s)
    s.add_argument("--boundary", choices=("periodic", "clamp"), default="periodic")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_gradient)

    s = sub.add_parser("distmat", help="pairwise L^{p,q} squared distances")
    series_input(s)
    s.add_argument("--pq", default="2,2", help="exponents p,q (inf allowed)")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--csv", help="also write the matrix as CSV")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_distmat)

    s = sub.add_parser("mds", help="classical MDS of a distance matrix")
    s.add_argument("-i", "--input", required=True, help="distance matrix file")
    s.add_argument("--eps-keep", type=float, default=1e-9)
    s.add_argument("--k", type=int, help="coordinates written to coords.csv")
    s.add_argument("-o", "--output", required=True, help="output directory")
    s.set_defaults(func=cmd_mds)

    s = sub.add_parser("reconstruct", help="rank-k reconstruction of one frame")
    s.add_argument("--series", required=True, help="field directory")
    s.add_argument("--embedding", required=True, help="embedding file")
    s.add_argument("--frame", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--image", help="also render a PGM/PPM")
    s.add_argument("-o", "--output", required=True, help="field file to write")
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("lyapunov", help="largest Lyapunov exponent of a CSV column")
    s.add_argument("-i", "--input", required=True, help="CSV file")
    s.add_argument("--column", help="column name or index (default: second column, or the only one)")
    s.add_argument("--embed-dim", type=int, default=3)
    s.add_argument("--delay", type=_auto_int, default=None, help="integer or 'auto'")
    s.add_argument("--theiler", type=_auto_int, default=None, help="integer or 'auto'")
    s.add_argument("--fit-range", type=_pair)
    s.add_argument("--sample-time", type=float, default=1.0)
    s.add_argument("-o", "--output", help="divergence curve CSV")
    s.set_defaults(func=cmd_lyapunov)

    s = sub.add_parser("pipeline", help="full analysis run with manifest")
    s.add_argument("--config", help="INI run description")
    s.add_argument("--manifest", help="repeat the run recorded in a manifest")
    s.add_argument("-o", "--output")
    s.add_argument("--source", choices=("cgle", "gray_scott", "fields", "images"))
    s.add_argument("--preset")
    s.add_argument("--input-dir")
    s.add_argument("--lattice", type=_pair)
    s.add_argument("--field")
    s.add_argument("--pq")
    s.add_argument("--gradient", action=argparse.BooleanOptionalAction, default=None)
    s.add_argument("--k", type=int)
    s.add_argument("--no-reconstruct", action="store_true")
    s.add_argument("--lyapunov", action=argparse.BooleanOptionalAction, default=None)
    s.add_argument("--embed-dim", type=int)
    s.add_argument("--delay", type=int)
    s.add_argument("--jobs", type=int)
    s.add_argument("--figures", action=argparse.BooleanOptionalAction, default=None)
    s.add_argument("--save-series", action=argparse.BooleanOptionalAction, default=None)
    s.add_argument("--overwrite", action="store_true")
    s.add_argument("--set", type=_kv, action="append", metavar="KEY=VALUE", help="simulator parameter override")
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser("mesh", help="write an icosphere as OFF")
    s.add_argument("--level", type=int, default=4)
    s.add_argument("--radius", type=float, default=1.0)
    s.add_argument("--weights", help="also write face-area weights CSV")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_mesh)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        args.func(args)
    except CliError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
