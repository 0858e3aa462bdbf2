"""Config-driven batch front-end.

Subcommands: simulate, containment, identify, bounds, ci, report.

Exit codes
----------
0  success
1  unexpected internal error
2  configuration or input error
3  model refuted (empty region or empty confidence set)
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import functionals as fn
from .cells import Schema, estimate_cells, estimate_dynamic
from .containment import build_table
from .dgp import DgpConfig, default_schema, simulate
from .grid import GridSpec, default_grid, rho_axis
from .identify import CONSTRAINTS, RefutedError, bounds_table, default_slack, identified_region
from .inference import ALPHA, K_GRID, GridLikelihood, confidence_interval
from .models import DynamicTwoPeriod, KINDS, make_model
from .theta import InfeasibleThetaError, ThetaPoint

SCHEMA_VERSION = 1
EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_REFUTED = 0, 1, 2, 3
SUBCOMMANDS = ("simulate", "containment", "identify", "bounds", "ci", "report")


class ConfigError(ValueError):
    pass


# ----------------------------------------------------------------------------
# config


def _tuplify(v):
    return tuple(_tuplify(e) for e in v) if isinstance(v, list) else v


def _axis(spec) -> tuple:
    """A list of values, or {start, stop, num} for equally spaced values."""
    if isinstance(spec, dict):
        try:
            return tuple(np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"])))
        except KeyError as exc:
            raise ConfigError(f"axis table needs start, stop, num (missing {exc})") from None
    if isinstance(spec, (int, float)):
        return (float(spec),)
    if not spec:
        raise ConfigError("grid axes must be nonempty")
    return tuple(float(v) for v in spec)


def _pi_key(entry: dict):
    if "key" in entry:
        return _tuplify(entry["key"])
    return (tuple(entry.get("z", [])), tuple(entry.get("x", [])))


def parse_theta(table: dict) -> ThetaPoint:
    """[theta] table: mu, f, optional cutoffs, pi = [{z, x, value} or {key, value}]."""
    try:
        pi = tuple((_pi_key(e), float(e["value"])) for e in table.get("pi", []))
        return ThetaPoint(tuple(table["mu"]), tuple(table.get("f", [0.0])), pi, table.get("cutoffs"))
    except (KeyError, TypeError, InfeasibleThetaError) as exc:
        raise ConfigError(f"bad theta declaration: {exc}") from None


def parse_grid(table: dict) -> GridSpec:
    mu = tuple(_axis(a) for a in table.get("mu", []))
    if not mu:
        raise ConfigError("grid needs at least one mu axis")
    f = tuple(_axis(a) for a in table.get("f", [list(rho_axis())]))
    cutoffs = tuple(tuple(c) for c in table["cutoffs"]) if "cutoffs" in table else (None,)
    pi = tuple((_pi_key(e), _axis(e["values"])) for e in table.get("pi", []))
    try:
        return GridSpec(mu, f, cutoffs, pi)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _functional(entry: dict) -> fn.Functional:
    entry = dict(entry)
    if "x_weights" in entry:
        entry["x_weights"] = tuple((tuple(w[0]), float(w[1])) for w in entry["x_weights"])
    try:
        return fn.Functional(**entry)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad functional {entry}: {exc}") from None


@dataclass
class RunConfig:
    """Resolved settings for one run; every default is written to the outputs."""

    kind: str
    model_options: dict = field(default_factory=dict)
    schema: Optional[Schema] = None
    data: Optional[str] = None
    bins: dict = field(default_factory=dict)
    simulate: dict = field(default_factory=dict)
    theta: Optional[dict] = None
    grid: Optional[dict] = None
    slack: Optional[float] = None
    constraints: tuple = ()
    method: Optional[str] = None
    functionals: tuple = ()
    ci_functional: dict = field(default_factory=lambda: {"name": "ASF", "d": 1})
    alpha: float = ALPHA
    K: int = K_GRID
    seed: int = 0
    out_dir: str = "out"
    threads: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}; choose from {sorted(KINDS)}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.K < 2:
            raise ConfigError("grid-k must be at least 2")
        if self.slack is not None and self.slack < 0:
            raise ConfigError("slack must be nonnegative")
        bad = [c for c in self.constraints if c not in CONSTRAINTS]
        if bad:
            raise ConfigError(f"unknown constraints {bad}; choose from {CONSTRAINTS}")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        try:
            self.model
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad model options: {exc}") from None
        if self.schema is None:
            self.schema = default_schema(self.model)

    @property
    def data_path(self) -> Optional[str]:
        """Declared data file, else the dataset written by ``simulate`` into the output directory."""
        if self.data is not None:
            return self.data
        fallback = Path(self.out_dir) / "data.csv"
        return str(fallback) if fallback.exists() else None

    @property
    def model(self):
        return make_model(self.kind, **self.model_options)

    def provenance(self) -> dict:
        doc = asdict(self)
        doc["schema"] = asdict(self.schema)
        return doc

    @classmethod
    def from_toml(cls, path, overrides: Optional[dict] = None) -> "RunConfig":
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config is not valid TOML: {exc}") from None
        return cls.from_dict(raw, overrides, base=Path(path).parent)

    @classmethod
    def from_dict(cls, raw: dict, overrides: Optional[dict] = None, base: Path = Path(".")) -> "RunConfig":
        model = raw.get("model", {})
        if "kind" not in model:
            raise ConfigError("[model] kind is required")
        sch = raw.get("schema")
        schema = None
        if sch is not None:
            schema = Schema(sch.get("y", "y"), tuple(sch.get("d", ["d"])), tuple(sch.get("x", [])),
                            tuple(sch.get("z", ["z"])))
        data = raw.get("data", {}).get("path")
        if data is not None and not Path(data).is_absolute():
            data = str(base / data)
        ident = raw.get("identify", {})
        inf = raw.get("inference", {})
        out = raw.get("output", {})
        kw = dict(kind=model["kind"], model_options=dict(model.get("options", {})), schema=schema, data=data,
                  bins=dict(raw.get("bins", {})), simulate=dict(raw.get("simulate", {})),
                  theta=raw.get("theta"), grid=raw.get("grid"), slack=ident.get("slack"),
                  constraints=tuple(c.lower() for c in ident.get("constraints", [])), method=ident.get("method"),
                  functionals=tuple(raw.get("bounds", {}).get("functionals", [])),
                  ci_functional=dict(inf.get("functional", {"name": "ASF", "d": 1})),
                  alpha=float(inf.get("alpha", ALPHA)), K=int(inf.get("K", K_GRID)), seed=int(inf.get("seed", 0)),
                  out_dir=str(out.get("dir", "out")), threads=int(raw.get("run", {}).get("threads", 1)))
        for key, value in (overrides or {}).items():
            if value is not None:
                kw[key] = value
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


# ----------------------------------------------------------------------------
# data


def read_data(path, schema: Schema) -> pd.DataFrame:
    """Comma-separated UTF-8 with a header row; missing values are an error."""
    if path is None:
        raise ConfigError("[data] path is required for this subcommand")
    try:
        frame = pd.read_csv(path, sep=",", encoding="utf-8", keep_default_na=True)
    except FileNotFoundError:
        raise ConfigError(f"data file not found: {path}") from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if all(_numeric(c) for c in frame.columns):
        raise ConfigError(f"{path} has no header row")
    missing = [c for c in schema.columns if c not in frame.columns]
    if missing:
        raise ConfigError(f"columns {missing} not found in {path}")
    holes = frame[schema.columns].isna().any()
    if holes.any():
        raise ConfigError(f"missing values in columns {list(holes[holes].index)}")
    return frame


def _numeric(text) -> bool:
    try:
        float(text)
        return True
    except (TypeError, ValueError):
        return False


def cell_stats(cfg: RunConfig, frame: pd.DataFrame):
    model = cfg.model
    if isinstance(model, DynamicTwoPeriod):
        return estimate_dynamic(frame, cfg.schema)
    try:
        return estimate_cells(frame, cfg.schema, bins=cfg.bins or None, support=model.support)
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def resolve_grid(cfg: RunConfig, stats, for_inference: bool = False) -> GridSpec:
    if cfg.grid is not None:
        return parse_grid(cfg.grid)
    try:
        spec = default_grid(cfg.model, stats)
    except NotImplementedError as exc:
        raise ConfigError(str(exc)) from None
    if for_inference and spec.pi:
        # a data-free grid: selection indices become free axes
        coarse = tuple(np.linspace(spec.mu[0][0], spec.mu[0][-1], 11))
        spec = GridSpec(tuple(coarse for _ in spec.mu), (rho_axis(21),), spec.cutoffs,
                        tuple((k, tuple(np.linspace(0.1, 0.9, 9))) for k, _ in spec.pi))
    return spec


def default_functionals(cfg: RunConfig) -> list:
    if cfg.functionals:
        return [_functional(e) for e in cfg.functionals]
    x = tuple(0 for _ in cfg.schema.x)
    out = [fn.Functional("ASF", d=0, x=x), fn.Functional("ASF", d=1, x=x)]
    if cfg.model.discrete:
        out.append(fn.Functional("SWITCH", x=x))
    return out


# ----------------------------------------------------------------------------
# subcommands


def _out(cfg: RunConfig) -> Path:
    path = Path(cfg.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, default=_json_default) + "\n", encoding="utf-8")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (tuple, set, frozenset)):
        return list(obj)
    return repr(obj)


def cmd_simulate(cfg: RunConfig) -> int:
    sim = cfg.simulate
    table = cfg.theta or sim.get("theta")
    if table is None or "n" not in sim:
        raise ConfigError("simulate needs [simulate] n and a [theta] table")
    x_values = tuple(tuple(x) if isinstance(x, list) else (x,) for x in sim.get("x_values", [])) or ((),)
    try:
        dgp = DgpConfig(cfg.kind, parse_theta(table), int(sim["n"]), int(sim.get("seed", cfg.seed)),
                        z_values=tuple(sim.get("z_values", (0, 1))), x_values=x_values,
                        p_s=float(sim.get("p_s", 0.5)), model_options=tuple(sorted(cfg.model_options.items())))
        data = simulate(dgp)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"simulation failed: {exc}") from None
    out = _out(cfg)
    data.to_csv(out / "data.csv", out / "latent.csv")
    _write_json(out / "simulate.json", {"schema_version": SCHEMA_VERSION, "rows": len(data),
                                        "config": cfg.provenance()})
    print(f"wrote {len(data)} rows to {out / 'data.csv'}")
    return EXIT_OK


def cmd_containment(cfg: RunConfig) -> int:
    if cfg.theta is None:
        raise ConfigError("containment needs a [theta] table")
    model = cfg.model
    if not model.discrete:
        raise ConfigError("containment tables need a discrete outcome")
    stats = cell_stats(cfg, read_data(cfg.data_path, cfg.schema))
    theta = parse_theta(cfg.theta)
    try:
        table = build_table(model, theta, sorted(stats.cells, key=repr), seed=cfg.seed)
    except KeyError as exc:
        raise ConfigError(f"theta lacks a selection index: {exc}") from None
    out = _out(cfg)
    table.to_csv(out / "containment.csv")
    _write_json(out / "containment.json", {"schema_version": SCHEMA_VERSION, "theta": theta.as_dict(),
                                           "config": cfg.provenance()})
    print(f"wrote {len(table.entries)} rows to {out / 'containment.csv'}")
    return EXIT_OK


def _region(cfg: RunConfig):
    frame = read_data(cfg.data_path, cfg.schema)
    stats = cell_stats(cfg, frame)
    slack = default_slack(stats) if cfg.slack is None else cfg.slack
    spec = resolve_grid(cfg, stats)
    try:
        region = identified_region(spec, stats, cfg.model, cfg.method, slack, cfg.constraints, seed=cfg.seed)
    except KeyError as exc:
        raise ConfigError(f"grid lacks a selection index: {exc}") from None
    return region, slack


def cmd_identify(cfg: RunConfig) -> int:
    region, slack = _region(cfg)
    out = _out(cfg)
    region.to_csv(out / "region.csv")
    doc = json.loads(region.to_json())
    doc["config"] = cfg.provenance()
    _write_json(out / "region.json", doc)
    print(f"accepted {int(region.accepted.sum())} of {len(region.points)} grid points (slack {slack:.4g})")
    if region.empty:
        print("model refuted: no grid point satisfies the restrictions", file=sys.stderr)
        return EXIT_REFUTED
    return EXIT_OK


def cmd_bounds(cfg: RunConfig) -> int:
    region, slack = _region(cfg)
    if region.empty:
        print("model refuted: no grid point satisfies the restrictions", file=sys.stderr)
        return EXIT_REFUTED
    model = cfg.model
    funcs = default_functionals(cfg)
    try:
        table = bounds_table(region, funcs, model)
    except NotImplementedError as exc:
        raise ConfigError(str(exc)) from None
    asf = {f.d: f for f in funcs if f.name == "ASF" and not f.x_weights}
    if 0 in asf and 1 in asf and asf[0].x == asf[1].x:
        pts = region.accepted_points
        ate = fn.evaluate(asf[1], model, pts) - fn.evaluate(asf[0], model, pts)
        table.loc[len(table)] = [f"ATE(x={','.join(f'{v:g}' for v in asf[1].x)})", ate.min(), ate.max()]
    out = _out(cfg)
    table.to_csv(out / "bounds.csv", index=False, float_format="%.10g", lineterminator="\n")
    _write_json(out / "bounds.json", {"schema_version": SCHEMA_VERSION, "slack": slack,
                                      "constraints": list(cfg.constraints),
                                      "n_accepted": int(region.accepted.sum()),
                                      "bounds": table.to_dict(orient="records"), "config": cfg.provenance()})
    print(table.to_string(index=False))
    return EXIT_OK


def cmd_ci(cfg: RunConfig) -> int:
    model = cfg.model
    frame = read_data(cfg.data_path, cfg.schema)
    stats = cell_stats(cfg, frame)
    spec = resolve_grid(cfg, stats, for_inference=True)
    functional = _functional(cfg.ci_functional)
    try:
        grid = GridLikelihood(model, spec)
        result = confidence_interval(functional, grid, frame, cfg.schema, cfg.alpha, cfg.K, cfg.seed)
    except (NotImplementedError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    except KeyError as exc:
        raise ConfigError(f"grid lacks a selection index: {exc}") from None
    out = _out(cfg)
    doc = result.as_dict()
    doc["config"] = cfg.provenance()
    _write_json(out / "ci.json", doc)
    print(result.table())
    if result.refuted:
        print("model refuted: the confidence set is empty", file=sys.stderr)
        return EXIT_REFUTED
    return EXIT_OK


def render_report(out_dir) -> str:
    """Plain-text summary of every artifact present in an output directory."""
    out = Path(out_dir)
    lines = [f"setcf report for {out}", ""]
    if (out / "simulate.json").exists():
        doc = json.loads((out / "simulate.json").read_text())
        lines += [f"simulated rows: {doc['rows']}", ""]
    if (out / "containment.csv").exists():
        table = pd.read_csv(out / "containment.csv")
        lines += ["containment table", table.to_string(index=False), ""]
    if (out / "region.json").exists():
        doc = json.loads((out / "region.json").read_text())
        lines += [f"identified region ({doc['method']}, slack {doc['slack']:.4g}, constraints "
                  f"{','.join(doc['constraints']) or 'none'}): {doc['n_accepted']} of {doc['n_points']} points"
                  + ("  REFUTED" if doc["refuted"] else ""), ""]
    if (out / "bounds.csv").exists():
        lines += ["functional bounds", pd.read_csv(out / "bounds.csv").to_string(index=False), ""]
    if (out / "ci.json").exists():
        doc = json.loads((out / "ci.json").read_text())
        span = "empty (refuted)" if doc["refuted"] else f"[{doc['lower']:.4f}, {doc['upper']:.4f}]"
        lines += [f"confidence interval for {doc['functional']}: {span}  "
                  f"(alpha={doc['alpha']}, K={doc['K']}, threshold={doc['threshold']:g})", ""]
    if len(lines) == 2:
        lines.append("no artifacts found")
    return "\n".join(lines).rstrip() + "\n"


def cmd_report(cfg: RunConfig) -> int:
    text = render_report(cfg.out_dir)
    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    (Path(cfg.out_dir) / "report.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "containment": cmd_containment, "identify": cmd_identify,
            "bounds": cmd_bounds, "ci": cmd_ci, "report": cmd_report}


# ----------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="setcf", description="Set-valued control function toolkit")
    parser.add_argument("command", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="TOML run configuration")
    parser.add_argument("--seed", type=int, help="seed for simulation, MC draws and sample splits")
    parser.add_argument("--slack", type=float, help="acceptance slack (default 2 x largest cell SE)")
    parser.add_argument("--alpha", type=float, help="CI level parameter (default 0.05)")
    parser.add_argument("--grid-k", type=int, dest="K", help="number of candidate functional values (default 200)")
    parser.add_argument("--constraints", help="comma-separated shape restrictions, e.g. mts,mtr")
    parser.add_argument("--out-dir", dest="out_dir", help="directory for artifacts")
    parser.add_argument("--threads", type=int, help="worker count recorded for the run")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {k: getattr(args, k) for k in ("seed", "slack", "alpha", "K", "out_dir", "threads")}
    if args.constraints is not None:
        overrides["constraints"] = tuple(c.strip().lower() for c in args.constraints.split(",") if c.strip())
    try:
        cfg = RunConfig.from_toml(args.config, overrides)
        if args.seed is not None:
            cfg.simulate["seed"] = args.seed
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RefutedError as exc:
        print(f"model refuted: {exc}", file=sys.stderr)
        return EXIT_REFUTED


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
