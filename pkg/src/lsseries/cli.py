"""Command-line interface.

    lsseries fit|band|pointwise|diagnostics|approx|mc --config PATH [--seed U64] [--out DIR] [--workers N]

The config is a TOML file with the sections [io], [basis], [functional],
[inference], [diagnostics], [approx] and [mc]. Relative paths resolve against
the config file's directory. Every command writes ``run.json``, which holds the
fully resolved configuration (defaults included). Randomized commands (band, mc)
require an explicit seed. Errors go to stderr as one JSON object, and the exit
code is 2 (config), 3 (data), 4 (numerical) or 5 (study guard).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from . import io as sio
from .approx import approx_table, wage_analog
from .bases import BasisSpec, default_diagnostic_grid, diagnostics, make_basis, rule_of_thumb_k
from .errors import DimensionMismatch, InvalidConfig, SeriesError
from .experiments.dgp import TRUTHS
from .experiments.harness import _plain
from .experiments.studies import STUDIES, run_study
from .functionals import KINDS, FunctionalSpec, build_loadings
from .inference import DEFAULT_B, DEFAULT_R, METHODS, SIDES, pointwise_ci, uniform_band
from .numutil import Quadrature, RandomStream, gauss_legendre, uniform_grid
from .regression import Dataset, fit, gram_deviation

COMMANDS = ("fit", "band", "pointwise", "diagnostics", "approx", "mc")
RANDOMIZED = ("band", "mc")
U64_MAX = 2**64 - 1

_SECTION_KEYS = {
    "io": {"input", "output"},
    "basis": {"family", "k", "order", "dims", "orthonormal"},
    "functional": {
        "kind", "coord", "order", "grid", "grid_points", "grid_file", "measure", "measure_file", "cond_nodes",
    },
    "inference": {"alpha", "R", "B", "method", "side", "seed"},
    "diagnostics": {"grid_points"},
    "approx": {"truth", "bases", "sup_grid"},
    "mc": None,  # free-form study parameters
}


# ---------------------------------------------------------------------------
# config


class Config:
    def __init__(self, raw: dict, base_dir: Path):
        unknown = set(raw) - set(_SECTION_KEYS)
        if unknown:
            raise InvalidConfig(f"unknown config sections {sorted(unknown)}; allowed: {sorted(_SECTION_KEYS)}")
        for name, keys in _SECTION_KEYS.items():
            sec = raw.get(name, {})
            if not isinstance(sec, dict):
                raise InvalidConfig(f"[{name}] must be a table")
            if keys is not None and set(sec) - keys:
                raise InvalidConfig(f"unknown keys {sorted(set(sec) - keys)} in [{name}]; allowed: {sorted(keys)}")
        self.raw = raw
        self.base_dir = base_dir

    def section(self, name: str) -> dict:
        return dict(self.raw.get(name, {}))

    def path(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p


def load_config(path) -> Config:
    path = Path(path)
    if not path.is_file():
        raise InvalidConfig(f"config file {str(path)!r} does not exist")
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise InvalidConfig(f"cannot parse config {str(path)!r}: {exc}") from None
    return Config(raw, path.parent)


def _seed(cli_seed: int | None, section: dict, command: str) -> int | None:
    seed = cli_seed if cli_seed is not None else section.get("seed")
    if seed is None:
        if command in RANDOMIZED:
            raise InvalidConfig(f"'{command}' draws random numbers and needs a seed (--seed or config); none given")
        return None
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= U64_MAX:
        raise InvalidConfig(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return int(seed)


def _basis_spec(sec: dict, n: int | None) -> tuple[BasisSpec, dict]:
    if not sec:
        raise InvalidConfig("[basis] section is required")
    sec = dict(sec)
    auto = sec.get("k") == "auto"
    if auto:
        if n is None:
            raise InvalidConfig("k = 'auto' needs input data")
        sec.pop("k")
        sec["k"] = rule_of_thumb_k(n, BasisSpec.from_dict({**sec, "k": 1}))
    spec = BasisSpec.from_dict(sec)
    resolved = spec.to_dict()
    resolved.setdefault("order", spec.order)
    resolved.setdefault("orthonormal", spec.orthonormal)
    if auto:
        resolved["k_rule"] = "heuristic ceil(n^(1/3)), not a theoretically tuned choice"
    return spec, resolved


def _grid(cfg: Config, sec: dict, dim: int) -> tuple[np.ndarray, dict]:
    if "grid_file" in sec:
        return sio.read_grid(cfg.path(sec["grid_file"]), dim), {"grid_file": sec["grid_file"]}
    if "grid" in sec:
        g = np.asarray(sec["grid"], dtype=float)
        g = g.reshape(-1, 1) if g.ndim == 1 else g
        if g.shape[1] != dim:
            raise InvalidConfig(f"functional grid points must have {dim} coordinates")
        return g, {"grid": g.tolist()}
    m = int(sec.get("grid_points", 101 if dim == 1 else 21))
    if m < 2:
        raise InvalidConfig("grid_points must be >= 2")
    return uniform_grid(m, dim), {"grid_points": m}


def _measure(cfg: Config, sec: dict, dim: int) -> tuple[Quadrature, dict]:
    kind = sec.get("measure", "uniform")
    if kind == "uniform":
        return gauss_legendre(dim), {"measure": "uniform"}
    if kind == "nodes":
        if "measure_file" not in sec:
            raise InvalidConfig("measure = 'nodes' needs measure_file")
        nodes, w = sio.read_nodes(cfg.path(sec["measure_file"]), dim)
        return Quadrature(nodes, w), {"measure": "nodes", "measure_file": sec["measure_file"]}
    raise InvalidConfig(f"measure must be 'uniform' or 'nodes', got {kind!r}")


def _functional(cfg: Config, dim: int) -> tuple[FunctionalSpec, dict]:
    sec = cfg.section("functional")
    kind = sec.get("kind", "value")
    if kind not in KINDS:
        raise InvalidConfig(f"functional kind must be one of {KINDS}, got {kind!r}")
    coord, order = int(sec.get("coord", 0)), int(sec.get("order", 1))
    resolved: dict[str, Any] = {"kind": kind, "coord": coord, "order": order}
    if kind == "average_derivative":
        mu, mres = _measure(cfg, sec, dim)
        resolved.update(mres)
        return FunctionalSpec(kind, coord=coord, measure=mu), resolved
    if kind == "cond_average_derivative":
        if dim < 2:
            raise InvalidConfig("cond_average_derivative needs a basis of dimension >= 2")
        grid, gres = _grid(cfg, sec, dim - 1)
        m = int(sec.get("cond_nodes", 200))
        q = gauss_legendre(1, m)
        resolved.update(gres, cond_measure="uniform", cond_nodes=m)
        return FunctionalSpec(kind, grid=grid, coord=coord, cond_measures=[q] * grid.shape[0]), resolved
    grid, gres = _grid(cfg, sec, dim)
    resolved.update(gres)
    return FunctionalSpec(kind, grid=grid, coord=coord, order=order), resolved


def _inference(sec: dict) -> dict:
    alpha = float(sec.get("alpha", 0.05))
    if not 0.0 < alpha < 1.0:
        raise InvalidConfig(f"alpha must lie in (0, 1), got {alpha}")
    method = sec.get("method", "gaussian_multiplier")
    if method not in METHODS:
        raise InvalidConfig(f"method must be one of {METHODS}, got {method!r}")
    side = sec.get("side", "two_sided")
    if side not in SIDES:
        raise InvalidConfig(f"side must be one of {SIDES}, got {side!r}")
    return {"alpha": alpha, "R": int(sec.get("R", DEFAULT_R)), "B": int(sec.get("B", DEFAULT_B)),
            "method": method, "side": side}


def _load_data(cfg: Config) -> tuple[Dataset, dict]:
    io = cfg.section("io")
    if "input" not in io:
        raise InvalidConfig("[io] input is required for this command")
    return sio.read_dataset(cfg.path(io["input"])), {"input": io["input"]}


def _fit_setup(cfg: Config):
    data, io_res = _load_data(cfg)
    spec, bres = _basis_spec(cfg.section("basis"), data.n)
    if spec.k > data.n:
        raise InvalidConfig(f"k={spec.k} exceeds n={data.n}; the least squares fit needs k <= n")
    basis = make_basis(spec)
    if basis.dim != data.dim:
        raise DimensionMismatch(f"data has {data.dim} x columns but the basis has dimension {basis.dim}")
    return data, basis, fit(data, basis), io_res, bres


# ---------------------------------------------------------------------------
# commands


def cmd_fit(cfg: Config, out: Path, seed: int | None, workers: int) -> dict:
    data, basis, f, io_res, bres = _fit_setup(cfg)
    sio.write_vector(out / "beta.csv", f.beta_hat, "beta")
    sio.write_matrix(out / "Q_hat.csv", f.Q_hat)
    sio.write_matrix(out / "Sigma_hat.csv", f.Sigma_hat)
    sio.write_matrix(out / "Omega_hat.csv", f.Omega_hat)
    res = f.residuals
    summary = {
        "n": data.n,
        "k": f.k,
        "residual_max_abs": float(np.max(np.abs(res))),
        "residual_rms": float(np.sqrt(np.mean(res**2))),
        "residual_mean": float(np.mean(res)),
        "min_eig_Q_hat": float(np.linalg.eigvalsh(f.Q_hat)[0]),
    }
    sio.write_keyvalue(out / "residuals.txt", summary)
    return {"io": io_res, "basis": bres, "result": summary}


def _band_like(cfg: Config, out: Path, seed: int | None, pointwise: bool) -> dict:
    data, basis, f, io_res, bres = _fit_setup(cfg)
    fspec, fres = _functional(cfg, basis.dim)
    loadings = build_loadings(fspec, basis)
    inf = _inference(cfg.section("inference"))
    if pointwise:
        band = pointwise_ci(f, loadings, inf["alpha"])
        name = "pointwise"
        inf = {"alpha": inf["alpha"]}
    else:
        draws = inf["R"] if inf["method"] == "gaussian_multiplier" else inf["B"]
        band = uniform_band(f, loadings, inf["alpha"], draws, RandomStream(seed, 0), inf["side"], inf["method"], data)
        name = "band"
    sio.write_band(out / f"{name}.csv", band)
    meta = {
        "critical_value": band.critical_value,
        "alpha": band.alpha,
        "method": band.method,
        "side": band.side,
        "draws": band.draws,
        "seed": "none" if seed is None else seed,
        "n": data.n,
        "k": f.k,
        "grid_size": loadings.grid.shape[0],
        "xi_theta": loadings.xi_theta,
    }
    sio.write_keyvalue(out / f"{name}_meta.txt", meta)
    return {"io": io_res, "basis": bres, "functional": fres, "inference": {**inf, "seed": seed}, "result": meta}


def cmd_band(cfg, out, seed, workers):
    return _band_like(cfg, out, seed, pointwise=False)


def cmd_pointwise(cfg, out, seed, workers):
    return _band_like(cfg, out, seed, pointwise=True)


def cmd_diagnostics(cfg: Config, out: Path, seed: int | None, workers: int) -> dict:
    io = cfg.section("io")
    data = None
    io_res: dict = {}
    if "input" in io:
        data, io_res = _load_data(cfg)
    spec, bres = _basis_spec(cfg.section("basis"), None if data is None else data.n)
    basis = make_basis(spec)
    m = int(cfg.section("diagnostics").get("grid_points", default_diagnostic_grid(basis.dim)))
    d = diagnostics(basis, m)
    result: dict[str, Any] = {
        "family": spec.family,
        "k": basis.k,
        "dim": basis.dim,
        "xi_k": d.xi_k,
        "xi_k_lipschitz": d.xi_k_lipschitz,
        "grid_points_per_dim": m,
        "grid_size": d.grid_size,
    }
    if data is not None:
        P = basis.eval(data.x)
        Q = P.T @ P / data.n
        ev = np.linalg.eigvalsh(0.5 * (Q + Q.T))
        result.update(
            n=data.n,
            min_eig_Q_hat=float(ev[0]),
            max_eig_Q_hat=float(ev[-1]),
            gram_deviation=gram_deviation(data, basis) if basis.orthonormal else "n/a (basis not orthonormal)",
            k_log_n_over_n=float(basis.k * np.log(data.n) / data.n),
        )
    sio.write_keyvalue(out / "diagnostics.txt", result)
    return {"io": io_res, "basis": bres, "diagnostics": {"grid_points": m}, "result": result}


def _truth(name: str):
    if name == "wage_analog":
        return wage_analog, 1
    if name in TRUTHS:
        return TRUTHS[name], TRUTHS[name].dim
    raise InvalidConfig(f"unknown truth {name!r}; available: {sorted(TRUTHS) + ['wage_analog']}")


def cmd_approx(cfg: Config, out: Path, seed: int | None, workers: int) -> dict:
    sec = cfg.section("approx")
    name = sec.get("truth", "wage_analog")
    g, dim = _truth(name)
    raw_bases = sec.get("bases") or ([cfg.section("basis")] if cfg.section("basis") else None)
    if not raw_bases:
        raise InvalidConfig("[approx] bases (a list of basis tables) or a [basis] section is required")
    specs = [_basis_spec(b, None) for b in raw_bases]
    bases = [make_basis(s) for s, _ in specs]
    for b in bases:
        if b.dim != dim:
            raise InvalidConfig(f"truth {name!r} has dimension {dim} but a basis has dimension {b.dim}")
    sup_grid = int(sec.get("sup_grid", 2001 if dim == 1 else 256))
    reports = approx_table(g, bases, gauss_legendre(dim), sup_grid)
    keys = ["family", "k", "c_k_hat", "sup_err", "lebesgue_factor"]
    sio.write_table(out / "approx.csv", keys, ([r.row()[k] for k in keys] for r in reports))
    return {
        "approx": {"truth": name, "bases": [r for _, r in specs], "sup_grid": sup_grid, "measure": "uniform"},
        "result": [r.row() for r in reports],
    }


def cmd_mc(cfg: Config, out: Path, seed: int | None, workers: int) -> dict:
    sec = cfg.section("mc")
    study = sec.pop("study", None)
    if study is None:
        raise InvalidConfig(f"[mc] study is required; available: {', '.join(sorted(STUDIES))}")
    sec.pop("seed", None)
    cfg_workers = int(sec.pop("workers", 1))
    dgp = sec.pop("dgp", None)
    basis = sec.pop("basis", None)
    report = run_study(study, sec, seed=seed, workers=workers if workers > 0 else cfg_workers, dgp=dgp, basis=basis)
    report.to_csv(out / f"{study}.csv")
    report.to_json(out / f"{study}.json")
    return {"mc": {"study": study, "seed": seed, **report.settings}, "result": report.summary}


HANDLERS = {
    "fit": cmd_fit,
    "band": cmd_band,
    "pointwise": cmd_pointwise,
    "diagnostics": cmd_diagnostics,
    "approx": cmd_approx,
    "mc": cmd_mc,
}


# ---------------------------------------------------------------------------
# entry point


def _u64(s: str) -> int:
    try:
        v = int(s, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if not 0 <= v <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64 - 1]")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lsseries", description="Least-squares series regression and inference")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="TOML config file")
    p.add_argument("--seed", type=_u64, default=None, help="master seed (overrides the config)")
    p.add_argument("--out", default=None, help="output directory (overrides [io] output; default 'out')")
    p.add_argument("--workers", type=int, default=0, help="worker processes for mc (default: [mc] workers or 1)")
    return p


def _error_payload(exc: SeriesError) -> dict:
    payload = {"error": type(exc).__name__, "exit_code": exc.exit_code, "message": str(exc)}
    for attr in ("row", "column", "pivot", "index"):
        v = getattr(exc, attr, None)
        if v is not None:
            payload[attr] = v
    return payload


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        section = cfg.section("mc" if args.command == "mc" else "inference")
        seed = _seed(args.seed, section, args.command)
        out = Path(args.out) if args.out else cfg.path(cfg.section("io").get("output", "out"))
        out.mkdir(parents=True, exist_ok=True)
        summary = HANDLERS[args.command](cfg, out, seed, args.workers)
        run_json = {"command": args.command, "version": __version__, "seed": seed, **summary}
        (out / "run.json").write_text(
            json.dumps(_plain(run_json), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    except SeriesError as exc:
        print(json.dumps(_error_payload(exc), sort_keys=True), file=sys.stderr)
        return exc.exit_code
    return 0


def main(argv: list[str] | None = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
