"""End-to-end runs: data -> distances -> embedding -> reconstruction -> exponents.

Every run writes into its own directory and finishes with ``manifest.json``,
which records the full configuration, the simulator parameters, file format
versions, a checksum per output and the status of each stage. A manifest
can be fed back to ``run_pipeline`` to repeat the run; outputs carry no
timestamps, so repeated runs are byte-identical.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import logging
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .field import FIELD_VERSION, PQ, write_field, write_pgm, write_ppm
from .io import load_field_series, load_image_series, write_series
from .lyapunov import LyapunovConfig, max_lyapunov, norm_series, scalar_series_from_embedding
from .mds import EMB_VERSION, embed, variance_captured, write_coords_csv, write_embedding, write_spectrum_csv
from .metrics import DIST_VERSION, distance_matrix, write_distance_matrix
from .reconstruct import fit, reconstruct_frame, reconstruction_error
from .series import FieldSeries
from .sim_cgle import cgle_presets, scalar_series, simulate_cgle
from .sim_gray_scott import gs_presets, simulate_gray_scott

__all__ = ["PipelineConfig", "PipelineError", "run_pipeline", "load_config", "MANIFEST_VERSION"]

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1
SOURCES = ("cgle", "gray_scott", "fields", "images")
CGLE_FIELDS = ("abs", "re", "im", "complex")
GS_FIELDS = ("u", "v", "uv", "u_gradient")
COORDS_EXPORTED = 10


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class PipelineConfig:
    """Everything a run depends on.

    source : "cgle" | "gray_scott" (built-in presets) or "fields" | "images"
        (directories read with ``load_field_series`` / ``load_image_series``)
    field : which quantity to analyse; CGLE: abs, re, im, complex;
        Gray-Scott: u, v, uv, u_gradient. Ignored for directory input.
    overrides : simulator parameters replacing preset values
    k : reconstruction rank, None to skip reconstruction
    """

    output_dir: str
    source: str = "cgle"
    preset: str | None = "frozen"
    input_dir: str | None = None
    lattice: tuple[int, int] | None = None
    image_stride: float = 1.0
    field: str | None = None
    overrides: dict = dataclasses.field(default_factory=dict)
    pq: str = "2,2"
    gradient: bool = False
    boundary: str = "periodic"
    k: int | None = 3
    lyapunov: bool = False
    embed_dim: int = 3
    delay: int | None = None
    theiler_window: int | None = None
    fit_range: tuple[int, int] | None = None
    n_jobs: int = 1
    figures: bool = True
    save_series: bool = False
    render_frames: bool = True
    overwrite: bool = False

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}")
        if self.source in ("fields", "images") and not self.input_dir:
            raise ValueError(f"source {self.source!r} needs input_dir")
        if self.source == "cgle":
            if self.preset not in cgle_presets():
                raise ValueError(f"unknown CGLE preset {self.preset!r}; choose from {sorted(cgle_presets())}")
            self.field = self.field or "abs"
            if self.field not in CGLE_FIELDS:
                raise ValueError(f"CGLE field must be one of {CGLE_FIELDS}")
        elif self.source == "gray_scott":
            if self.preset not in gs_presets():
                raise ValueError(f"unknown Gray-Scott preset {self.preset!r}; choose from {sorted(gs_presets())}")
            self.field = self.field or "u"
            if self.field not in GS_FIELDS:
                raise ValueError(f"Gray-Scott field must be one of {GS_FIELDS}")
        PQ.parse(self.pq)
        if self.k is not None and int(self.k) < 1:
            raise ValueError("k must be at least 1 when reconstruction is requested")
        if self.boundary not in ("periodic", "clamp"):
            raise ValueError("boundary must be 'periodic' or 'clamp'")
        if self.lattice is not None:
            self.lattice = tuple(int(x) for x in self.lattice)
        if self.fit_range is not None:
            self.fit_range = tuple(int(x) for x in self.fit_range)
        self.overrides = {k: tuple(v) if isinstance(v, list) else v for k, v in dict(self.overrides).items()}

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for key in ("lattice", "fit_range"):
            if d[key] is not None:
                d[key] = list(d[key])
        d["overrides"] = {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(self.overrides.items())}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_manifest(cls, path, output_dir: str | None = None) -> "PipelineConfig":
        m = json.loads(Path(path).read_text())
        d = dict(m["config"])
        d["output_dir"] = output_dir if output_dir is not None else d.get("output_dir")
        return cls.from_dict(d)

    def pq_value(self) -> PQ:
        return PQ.parse(self.pq)

    def lyapunov_config(self, sample_time: float) -> LyapunovConfig:
        return LyapunovConfig(
            embed_dim=self.embed_dim,
            delay=self.delay,
            theiler_window=self.theiler_window,
            fit_range=self.fit_range,
            sample_time=sample_time,
        )


# -- configuration files ------------------------------------------------------

_INI_KEYS = {
    "input": {"source": str, "preset": str, "input_dir": str, "lattice": "pair", "image_stride": float, "field": str},
    "analysis": {"pq": str, "gradient": bool, "boundary": str, "k": "optint", "n_jobs": int},
    "lyapunov": {"enabled": bool, "embed_dim": int, "delay": "optint", "theiler_window": "optint", "fit_range": "pair"},
    "output": {"dir": str, "figures": bool, "save_series": bool, "render_frames": bool, "overwrite": bool},
}
_RENAMED = {("lyapunov", "enabled"): "lyapunov", ("output", "dir"): "output_dir"}


def _convert(kind, text: str):
    text = text.strip()
    if kind is bool:
        low = text.lower()
        if low in ("1", "yes", "true", "on"):
            return True
        if low in ("0", "no", "false", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind == "optint":
        return None if text.lower() in ("", "auto", "none") else int(text)
    if kind == "pair":
        if text.lower() in ("", "auto", "none"):
            return None
        a, b = text.replace("x", ",").split(",")
        return int(a), int(b)
    return kind(text)


def _override_value(text: str):
    """Simulator override: int, float, bool, comma pair or plain string."""
    text = text.strip()
    if "," in text:
        return tuple(_override_value(t) for t in text.split(","))
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def load_config(path) -> dict:
    """Parse an INI run description into ``PipelineConfig`` keyword arguments.

    Sections: [input], [analysis], [lyapunov], [output] and [simulation];
    the last holds simulator parameter overrides (e.g. ``grid = 64,64``).
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if not parser.read(path):
        raise ValueError(f"{path}: cannot read configuration")
    out: dict = {}
    for section in parser.sections():
        if section == "simulation":
            out["overrides"] = {k: _override_value(v) for k, v in parser.items(section)}
            continue
        if section not in _INI_KEYS:
            raise ValueError(f"{path}: unknown section [{section}]")
        for key, text in parser.items(section):
            if key not in _INI_KEYS[section]:
                raise ValueError(f"{path}: unknown key {key!r} in [{section}]")
            out[_RENAMED.get((section, key), key)] = _convert(_INI_KEYS[section][key], text)
    return out


# -- stages -------------------------------------------------------------------


def _apply_overrides(params, overrides: dict):
    names = {f.name for f in dataclasses.fields(params)}
    bad = set(overrides) - names
    if bad:
        raise ValueError(f"unknown simulator parameters: {sorted(bad)}")
    return dataclasses.replace(params, **overrides)


def _load(cfg: PipelineConfig) -> tuple[FieldSeries, dict]:
    if cfg.source == "cgle":
        params = _apply_overrides(cgle_presets()[cfg.preset], cfg.overrides)
        res = simulate_cgle(params)
        series = res.fields if cfg.field == "complex" else scalar_series(res.fields, cfg.field)
        return series, {"simulator": "cgle", "params": params.to_dict()}
    if cfg.source == "gray_scott":
        params = _apply_overrides(gs_presets()[cfg.preset], cfg.overrides)
        res = simulate_gray_scott(params)
        if cfg.field == "u_gradient":
            series = res.gradient
        elif cfg.field == "uv":
            series = res.fields
        else:
            series = res.fields.component(0 if cfg.field == "u" else 1)
        return series, {"simulator": "gray_scott", "params": params.to_dict()}
    if cfg.source == "fields":
        return load_field_series(cfg.input_dir), {"simulator": None}
    return load_image_series(cfg.input_dir, cfg.lattice, cfg.image_stride), {"simulator": None}


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _csv(path: Path, header: list[str], rows: np.ndarray, fmt="%.17g") -> Path:
    np.savetxt(path, rows, delimiter=",", fmt=fmt, header=",".join(header), comments="")
    return path


def _render(series: FieldSeries, out: Path, name: str, index: int) -> list[Path]:
    """PGM/PPM snapshot of one lattice frame (nothing for other spaces)."""
    if series.space.kind != "lattice" or series.rank not in (1, 3):
        return []
    frame = series[index]
    path = out / f"{name}.{'pgm' if series.rank == 1 else 'ppm'}"
    (write_pgm if series.rank == 1 else write_ppm)(frame, path)
    return [path, Path(str(path) + ".range")]


class _Run:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.stages: list[dict] = []
        self.summary: dict = {}
        self.source_info: dict = {}

    def stage(self, name: str, fn):
        rec = {"name": name, "status": "running", "outputs": []}
        self.stages.append(rec)
        log.info("stage %s", name)
        try:
            result, paths = fn()
        except PipelineError:
            rec["status"] = "FAILED"
            raise
        except Exception as exc:  # any stage failure is reported with its stage name
            rec["status"] = "FAILED"
            rec["error"] = f"{type(exc).__name__}: {exc}"
            raise PipelineError(name, str(exc)) from exc
        rec["status"] = "ok"
        rec["outputs"] = sorted(str(p.relative_to(self.out)) for p in paths)
        return result

    def manifest(self, status: str, error: PipelineError | None = None) -> dict:
        files = sorted(p for p in self.out.rglob("*") if p.is_file() and p.name != "manifest.json")
        m = {
            "manifest_version": MANIFEST_VERSION,
            "package_version": __version__,
            "status": status,
            "formats": {"field": FIELD_VERSION, "distance_matrix": DIST_VERSION, "embedding": EMB_VERSION},
            # the run directory itself is not part of the result
            "config": {k: v for k, v in self.cfg.to_dict().items() if k not in ("output_dir", "overwrite")},
            "source": self.source_info,
            "stages": self.stages,
            "summary": self.summary,
            "checksums": {str(p.relative_to(self.out)): _sha256(p) for p in files},
        }
        if error is not None:
            m["failed_stage"] = error.stage
            m["error"] = str(error)
        return m

    def write_manifest(self, status: str, error: PipelineError | None = None) -> Path:
        path = self.out / "manifest.json"
        path.write_text(json.dumps(self.manifest(status, error), indent=2, sort_keys=True) + "\n")
        if status == "FAILED":
            (self.out / "FAILED").write_text(f"{error}\n")
        return path


def _prepare_output(cfg: PipelineConfig) -> Path:
    out = Path(cfg.output_dir)
    if out.exists() and any(out.iterdir()):
        if not cfg.overwrite:
            raise PipelineError("setup", f"output directory {out} is not empty (use overwrite)")
        shutil.rmtree(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Execute every stage in order and return the manifest as a dict.

    Raises ``PipelineError`` naming the failed stage; the manifest written
    in that case has status "FAILED" and a ``FAILED`` marker file sits next
    to whatever outputs were already flushed.
    """
    out = _prepare_output(cfg)
    run = _Run(cfg)
    try:
        _execute(run, out)
    except PipelineError as err:
        run.write_manifest("FAILED", err)
        raise
    run.write_manifest("ok")
    return run.manifest("ok")


def _execute(run: _Run, out: Path) -> None:
    cfg = run.cfg
    pq = cfg.pq_value()

    def load():
        series, info = _load(cfg)
        run.source_info = info
        paths = []
        if cfg.save_series:
            paths += write_series(series, out / "series")
        if cfg.render_frames:
            paths += _render(series, out, "frame_first", 0)
            paths += _render(series, out, "frame_last", len(series) - 1)
        run.summary["n_frames"] = len(series)
        run.summary["n_points"] = series.space.n_points
        run.summary["rank"] = series.rank
        run.summary["stride"] = series.stride
        return series, paths

    series = run.stage("load", load)

    if cfg.gradient:
        def gradient():
            if series.space.kind != "lattice":
                raise ValueError("the lattice gradient needs a lattice space")
            return series.gradient(cfg.boundary), []

        series = run.stage("gradient", gradient)

    def distances():
        dm = distance_matrix(series, pq, n_jobs=cfg.n_jobs)
        paths = [out / "distances.dmsd"]
        write_distance_matrix(dm, paths[0])
        if cfg.figures:
            from .plotting import plot_distance_matrix

            paths.append(plot_distance_matrix(dm.d2, out / "distances.png", title=f"L^{{{pq}}} distance"))
        return dm, paths

    dm = run.stage("distance_matrix", distances)

    def embedding():
        e = embed(dm)
        paths = [out / "embedding.dmse", out / "spectrum.csv", out / "coords.csv", out / "embedding_3d.csv"]
        write_embedding(e, paths[0])
        write_spectrum_csv(e, paths[1])
        write_coords_csv(e, paths[2], k=COORDS_EXPORTED, timestamps=series.timestamps)
        pts = np.zeros((e.n, 3))
        pts[:, : min(3, e.k_retained)] = e.coords[:, :3]
        step = np.r_[0.0, np.linalg.norm(np.diff(pts, axis=0), axis=1)]
        _csv(paths[3], ["time", "x", "y", "z", "step"], np.column_stack([series.timestamps, pts, step]))
        run.summary["k_retained"] = e.k_retained
        run.summary["negative_mass"] = e.negative_mass
        run.summary["variance_captured"] = {
            str(k): variance_captured(e, k) for k in (1, 2, 3) if k <= e.k_retained
        }
        if cfg.figures:
            from .plotting import plot_coordinates, plot_embedding_3d, plot_spectrum

            paths.append(plot_spectrum(e.eigenvalues, out / "spectrum.png"))
            paths.append(plot_coordinates(series.timestamps, e.coords, out / "coords.png"))
            paths.append(plot_embedding_3d(e.coords, out / "embedding_3d.png"))
        return e, paths

    e = run.stage("embed", embedding)

    if cfg.k is not None:
        def reconstruction():
            k_used = min(int(cfg.k), e.k_retained)
            model = fit(series, e, k_max=k_used)
            ranks = list(range(1, k_used + 1)) or [0]
            errs = np.array([[reconstruction_error(model, i, r) for i in range(len(series))] for r in ranks])
            paths = [out / "reconstruction_errors.csv"]
            _csv(
                paths[0],
                ["time"] + [f"rank_{r}" for r in ranks],
                np.column_stack([series.timestamps, errs.T]),
            )
            run.summary["reconstruction"] = {
                "k_requested": int(cfg.k),
                "k_used": k_used,
                # rank-k reconstruction is exact only for L^{2,2} distances
                "exact": model.exact,
                "mean_error": {str(r): float(np.mean(row)) for r, row in zip(ranks, errs)},
            }
            for j in range(1, k_used + 1):
                mode = model.mode_field(j)
                paths.append(out / f"mode_{j}.dmsf")
                write_field(mode, paths[-1])
                if cfg.render_frames:
                    paths += _render(FieldSeries(series.space, mode.values[None], [0.0]), out, f"mode_{j}", 0)
            if cfg.render_frames:
                last = len(series) - 1
                recon = reconstruct_frame(model, last, ranks[-1])
                paths += _render(FieldSeries(series.space, recon.values[None], [0.0]), out, f"frame_last_rank{ranks[-1]}", 0)
            if cfg.figures:
                from .plotting import plot_reconstruction_errors

                paths.append(plot_reconstruction_errors(errs, out / "reconstruction_errors.png"))
            return None, paths

        run.stage("reconstruct", reconstruction)

    if cfg.lyapunov:
        def lyapunov():
            sample_time = series.stride or 1.0
            lcfg = cfg.lyapunov_config(sample_time)
            inputs = {"coord1": scalar_series_from_embedding(e, 1), "norm": norm_series(series, PQ(2, 2))}
            rows, paths, results = [], [], {}
            for name, x in inputs.items():
                r = max_lyapunov(x, lcfg)
                results[name] = r
                p = _csv(out / f"divergence_{name}.csv", ["step", "mean_log_separation"], np.column_stack([r.steps, r.divergence]))
                paths.append(p)
                rows.append(
                    {
                        "series": name,
                        "exponent_per_sample": r.exponent,
                        "exponent_per_time": r.exponent_per_time,
                        "r_squared": r.r_squared,
                        "fit_first": r.fit_range[0],
                        "fit_last": r.fit_range[1],
                        "delay": r.delay,
                        "theiler_window": r.theiler_window,
                        "embed_dim": r.embed_dim,
                    }
                )
                if cfg.figures:
                    from .plotting import plot_divergence

                    paths.append(plot_divergence(r.steps, r.divergence, r.fit_range, r.exponent, out / f"divergence_{name}.png"))
            table = out / "lyapunov.csv"
            keys = list(rows[0])
            lines = [",".join(keys)] + [",".join(_fmt(row[k]) for k in keys) for row in rows]
            table.write_text("\n".join(lines) + "\n")
            paths.append(table)
            run.summary["lyapunov"] = rows
            return results, paths

        run.stage("lyapunov", lyapunov)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)
