"""Command-line interface.

Every subcommand accepts ``--config FILE`` (``key = value`` lines, ``#``
comments); explicit flags override the file, which overrides the defaults.
Single evaluations print a JSON record that echoes the resolved settings;
sweeps and exponent curves write CSV.

Exit codes: 0 success, 2 invalid input, 3 infeasible computation, 4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import exponents, rates, reference, simulator
from .model import ChannelModel, DecoderMetric, InfeasibleError, InvalidInputError

EXIT_INVALID = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4

SQRT_HALF = 1.0 / math.sqrt(2.0)

# Built-in defaults; every key here can also appear in a config file.
DEFAULTS = {
    "h": "1",
    "alpha": "",
    "sigma2": "1",
    "px": "1",
    "points": str(rates.DEFAULT_CONFIG.n_points),
    "grid": str(rates.DEFAULT_CONFIG.grid_points),
    "omega_domain": rates.SYMBOL_DOMAIN,
    "phi": "",
    "gamma": "",
    "order": "",
    "alpha0": "",
    "rate": "",
    "rates": "",
    "axis": "alpha0",
    "values": "0.2:3:29",
    "ensembles": "iid,fc0",
    "n": "32",
    "ensemble": "sphere",
    "decoder": "metric",
    "epsilon": "",
    "trials": "1000",
    "seed": "0",
    "estimator": "exhaustive",
    "workers": "",
    "output": "",
    "bits": "false",
    "timing": "false",
}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def parse_list(text: str, name: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    try:
        values = tuple(float(v) for v in text.replace(" ", "").split(","))
    except ValueError:
        raise InvalidInputError(f"{name} must be a comma-separated list of numbers, got {text!r}") from None
    if not all(math.isfinite(v) for v in values):
        raise InvalidInputError(f"{name} must be finite")
    return values


def parse_float(text: str, name: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise InvalidInputError(f"{name} must be a number, got {text!r}") from None
    if not math.isfinite(value):
        raise InvalidInputError(f"{name} must be finite")
    return value


def parse_int(text: str, name: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise InvalidInputError(f"{name} must be an integer, got {text!r}") from None


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:count`` or an explicit comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise InvalidInputError(f"grid must be start:stop:count, got {text!r}")
        start, stop = parse_float(parts[0], "grid start"), parse_float(parts[1], "grid stop")
        count = parse_int(parts[2], "grid count")
        if count < 1:
            raise InvalidInputError("grid count must be positive")
        return np.linspace(start, stop, count)
    values = parse_list(text, "grid")
    if not values:
        raise InvalidInputError("grid is empty")
    return np.asarray(values)


def parse_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off", ""):
        return False
    raise InvalidInputError(f"expected a boolean, got {text!r}")


def read_config(path: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_string("[run]\n" + fh.read(), source=path)
    except OSError as exc:
        raise CliError(f"cannot read config file {path}: {exc}", EXIT_IO) from None
    except configparser.Error as exc:
        raise InvalidInputError(f"malformed config file {path}: {exc}") from None
    values = {k.replace("-", "_"): v for k, v in parser["run"].items()}
    unknown = sorted(set(values) - set(DEFAULTS))
    if unknown:
        raise InvalidInputError(f"unknown config keys: {', '.join(unknown)}")
    return values


@dataclass
class Settings:
    """Resolved string settings (defaults < config file < flags)."""

    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def channel(self) -> ChannelModel:
        return ChannelModel(parse_list(self["h"], "h"), parse_float(self["sigma2"], "sigma2"),
                            parse_float(self["px"], "px"))

    def metric(self, channel: ChannelModel | None = None) -> DecoderMetric:
        alpha = parse_list(self["alpha"], "alpha")
        if not alpha:
            if channel is None:
                raise InvalidInputError("--alpha is required")
            alpha = tuple(channel.h)  # matched metric by default
        return DecoderMetric(alpha)

    def rate_config(self) -> rates.RateConfig:
        return rates.RateConfig(n_points=parse_int(self["points"], "points"),
                                grid_points=parse_int(self["grid"], "grid"),
                                omega_domain=self["omega_domain"])

    def order(self) -> int | None:
        return parse_int(self["order"], "order") if self["order"].strip() else None

    def bits(self) -> bool:
        return parse_bool(self["bits"])

    def workers(self) -> int | None:
        return parse_int(self["workers"], "workers") if self["workers"].strip() else None


def resolve(args: argparse.Namespace) -> Settings:
    values = dict(DEFAULTS)
    if getattr(args, "config", None):
        values.update(read_config(args.config))
    for key in DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = str(flag).lower() if isinstance(flag, bool) else str(flag)
    return Settings(values)


def fmt(x) -> float | None:
    """Round to 10 significant digits for output (``None`` for NaN)."""
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return None
    if math.isinf(x):
        return x
    return float(f"{x:.10g}")


def to_units(x: float, bits: bool) -> float:
    return x / math.log(2.0) if bits else x


def rate_record(result: rates.RateResult, bits: bool) -> dict:
    out = {
        "rate": fmt(to_units(result.rate, bits)),
        "raw_rate": fmt(to_units(result.raw_rate, bits)),
        "units": "bits" if bits else "nats",
        "ensemble": result.ensemble,
        "status": result.status,
        "inner_argmin": [fmt(v) for v in np.atleast_1d(result.inner_argmin)],
        "quadrature_points": result.quadrature_points,
    }
    if result.outer_argmax is not None:
        out["outer_argmax"] = [fmt(v) for v in result.outer_argmax]
    if result.phi.size:
        out["phi"] = [fmt(v) for v in result.phi]
    if np.isfinite(result.eta2):
        out["eta2"] = fmt(result.eta2)
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_rate_ar(s: Settings) -> dict:
    ch = s.channel()
    cfg = s.rate_config()
    order = s.order()
    if order is None:
        res = rates.rate_ar_fixed(ch, s.metric(ch), parse_list(s["phi"], "phi"), cfg)
    else:
        res = rates.rate_ar_opt(ch, s.metric(ch), order, cfg)
    return rate_record(res, s.bits())


def cmd_rate_fc(s: Settings) -> dict:
    ch = s.channel()
    cfg = s.rate_config()
    order = s.order()
    if order is None:
        gamma = parse_list(s["gamma"], "gamma") or None
        res = rates.rate_fc_fixed(ch, s.metric(ch), gamma, cfg)
    else:
        res = rates.rate_fc_opt(ch, s.metric(ch), order, cfg)
    return rate_record(res, s.bits())


def cmd_rate_universal(s: Settings) -> dict:
    return rate_record(rates.rate_universal(s.channel()), s.bits())


def cmd_matched_capacity(s: Settings) -> dict:
    res = reference.matched_capacity(s.channel())
    return {"capacity": fmt(to_units(res.capacity, s.bits())), "units": "bits" if s.bits() else "nats",
            "water_level": fmt(res.water_level), "quadrature_points": res.quadrature_points}


def _exponent(s: Settings, universal: bool):
    ch = s.channel()
    if universal:
        solver = exponents.exponent_solver(ch, None)
    else:
        if s["alpha0"].strip():
            alpha0 = parse_float(s["alpha0"], "alpha0")
        else:
            alpha = parse_list(s["alpha"], "alpha")
            if len(alpha) != 1:
                raise InvalidInputError("the exponent needs a memoryless metric: pass --alpha0 (or a single --alpha)")
            alpha0 = alpha[0]
        solver = exponents.exponent_solver(ch, alpha0)
    if s["rates"].strip():
        grid = parse_grid(s["rates"])
        if np.any(grid < 0):
            raise InvalidInputError("rates must be nonnegative")
        buf = io.StringIO()
        exponents.curve_to_csv(solver.curve(grid), buf)
        return buf.getvalue()
    if not s["rate"].strip():
        raise InvalidInputError("pass --rate R or --rates start:stop:count")
    res = solver(parse_float(s["rate"], "rate"))
    return {"exponent": fmt(res.exponent), "rate": fmt(res.rate), "p_y": fmt(res.argmin[0]),
            "rho": fmt(res.argmin[1]), "omega_hat": [fmt(v) for v in res.arg_omega_hat], "status": res.status,
            "units": "nats"}


def cmd_exponent(s: Settings):
    return _exponent(s, universal=False)


def cmd_exponent_universal(s: Settings):
    return _exponent(s, universal=True)


def cmd_sweep(s: Settings) -> str:
    ch = s.channel()
    ensembles = [e.strip() for e in s["ensembles"].split(",") if e.strip()]
    rows = rates.sweep_rates(ch, s.metric(ch), s["axis"], parse_grid(s["values"]), ensembles, s.rate_config(),
                             workers=s.workers())
    if s.bits():
        for r in rows:
            r.rate, r.raw_rate = to_units(r.rate, True), to_units(r.raw_rate, True)
    buf = io.StringIO()
    rates.sweep_to_csv(rows, buf)
    return buf.getvalue()


def cmd_simulate(s: Settings) -> dict:
    ch = s.channel()
    kind = s["ensemble"]
    eps = parse_float(s["epsilon"], "epsilon") if s["epsilon"].strip() else None
    ens = simulator.Ensemble(kind, ch.p_x, parse_list(s["phi"], "phi"), parse_list(s["gamma"], "gamma"), eps)
    alpha = parse_list(s["alpha"], "alpha") or tuple(ch.h)
    if not s["rate"].strip():
        raise InvalidInputError("--rate is required")
    cfg = simulator.SimConfig(parse_int(s["n"], "n"), parse_float(s["rate"], "rate"), ens, s["decoder"],
                              alpha, parse_int(s["trials"], "trials"), parse_int(s["seed"], "seed"), s["estimator"])
    res = simulator.simulate_error_prob(cfg, ch)
    rec = res.as_record()
    for k in ("error_prob", "ci_low", "ci_high", "standard_error", "wall_time"):
        rec[k] = fmt(rec[k])
    if not parse_bool(s["timing"]):
        rec["wall_time"] = None  # keeps repeated runs byte-identical
    return rec


# Figure presets: (channel taps, metric template, swept coefficient, grid, ensembles)
FIGURES = {
    "1": ((1.0,), (1.0,), "alpha0", "0.2:3:29", "iid,fc0"),
    "2": ((SQRT_HALF, SQRT_HALF), (SQRT_HALF, SQRT_HALF), "alpha1", "0:1.5:41", "iid,ar1,fc0,fc1"),
    "3": ((2 / math.sqrt(5), 1 / math.sqrt(5)), (1.0, 1.0), "alpha0", "0.2:3:29", "iid,ar1,fc0,fc1"),
    "5": ((SQRT_HALF, SQRT_HALF, SQRT_HALF), (1.0,), "alpha0", "0.1:3:30", "iid,ar1,fc0,fc1"),
}


def figure_settings(figure: str, base: Settings) -> Settings:
    if figure not in FIGURES:
        raise InvalidInputError(f"figure must be one of {', '.join(FIGURES)}; got {figure!r}")
    h, alpha, axis, grid, ensembles = FIGURES[figure]
    values = dict(base.values)
    values.update({"h": ",".join(repr(v) for v in h), "alpha": ",".join(repr(v) for v in alpha),
                   "sigma2": "1", "px": "1", "axis": axis, "values": grid, "ensembles": ensembles})
    return Settings(values)


def cmd_reproduce(s: Settings, figure: str) -> str:
    """Wide CSV: the swept value, one rate column per ensemble, then statuses."""
    s = figure_settings(figure, s)
    ch = s.channel()
    ensembles = [e.strip() for e in s["ensembles"].split(",")]
    rows = rates.sweep_rates(ch, s.metric(ch), s["axis"], parse_grid(s["values"]), ensembles, s.rate_config(),
                             workers=s.workers())
    table: dict[float, dict[str, rates.SweepRow]] = {}
    for r in rows:
        table.setdefault(r.value, {})[r.ensemble] = r
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([s["axis"], *ensembles, *(f"status_{e}" for e in ensembles)])
    for value, by_ens in table.items():
        writer.writerow([rates.format_number(value),
                         *(rates.format_number(to_units(by_ens[e].rate, s.bits())) for e in ensembles),
                         *(by_ens[e].status for e in ensembles)])
    return buf.getvalue()


COMMANDS = {
    "rate-ar": cmd_rate_ar,
    "rate-fc": cmd_rate_fc,
    "rate-universal": cmd_rate_universal,
    "exponent": cmd_exponent,
    "exponent-universal": cmd_exponent_universal,
    "matched-capacity": cmd_matched_capacity,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isi-mismatch",
                                     description="Achievable rates and error exponents for Gaussian ISI channels "
                                                 "with mismatched decoding.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value settings file")
        p.add_argument("--h", help="channel taps, comma separated")
        p.add_argument("--alpha", help="metric taps (default: matched to --h)")
        p.add_argument("--sigma2", help="noise variance")
        p.add_argument("--px", help="input power")
        p.add_argument("--points", help="quadrature points")
        p.add_argument("--grid", help="outer grid points per dimension")
        p.add_argument("--omega-domain", dest="omega_domain", choices=[rates.SYMBOL_DOMAIN, rates.NONNEGATIVE_DOMAIN])
        p.add_argument("--output", help="write the result here instead of stdout")
        p.add_argument("--bits", action="store_const", const=True, default=None,
                       help="report rates in bits (nats are canonical)")
        p.add_argument("--workers", help="parallel processes for sweeps")

    for name in COMMANDS:
        p = sub.add_parser(name)
        common(p)
        if name in ("rate-ar", "rate-fc"):
            p.add_argument("--order", help="optimise over ensembles of this order")
            p.add_argument("--phi" if name == "rate-ar" else "--gamma",
                           help="fixed AR coefficients" if name == "rate-ar" else "fixed autocovariances")
        if name.startswith("exponent"):
            if name == "exponent":
                p.add_argument("--alpha0", help="memoryless metric coefficient")
            p.add_argument("--rate", help="single rate (JSON output)")
            p.add_argument("--rates", help="rate grid start:stop:count (CSV output)")
        if name == "sweep":
            p.add_argument("--axis", help="alpha<k> or h<k>")
            p.add_argument("--values", help="grid start:stop:count or a list")
            p.add_argument("--ensembles", help="e.g. iid,ar1,fc0,fc1,universal")
        if name == "simulate":
            p.add_argument("--n", help="block length")
            p.add_argument("--rate", help="rate in nats")
            p.add_argument("--ensemble", choices=simulator.ENSEMBLES)
            p.add_argument("--phi", help="AR coefficients (ensemble ar)")
            p.add_argument("--gamma", help="autocovariances (ensemble type)")
            p.add_argument("--epsilon", help="type-class tolerance (default 0.05 px)")
            p.add_argument("--decoder", choices=simulator.DECODERS)
            p.add_argument("--trials")
            p.add_argument("--seed")
            p.add_argument("--estimator", choices=simulator.ESTIMATORS)
            p.add_argument("--timing", action="store_const", const=True, default=None,
                           help="record wall time (breaks byte-identical output)")
    p = sub.add_parser("reproduce-figure")
    p.add_argument("figure", choices=sorted(FIGURES))
    common(p)
    return parser


def render(result) -> str:
    if isinstance(result, str):
        return result
    return json.dumps(result, indent=2, sort_keys=True) + "\n"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = resolve(args)
        if args.command == "reproduce-figure":
            result = cmd_reproduce(settings, args.figure)
            settings = figure_settings(args.figure, settings)
        else:
            result = COMMANDS[args.command](settings)
        if isinstance(result, dict):
            result = {"command": args.command, "config": dict(sorted(settings.values.items())), "result": result}
        text = render(result)
        if settings["output"]:
            try:
                with open(settings["output"], "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
            except OSError as exc:
                raise CliError(f"cannot write {settings['output']}: {exc}", EXIT_IO) from None
        else:
            sys.stdout.write(text)
        return 0
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except InvalidInputError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InfeasibleError as exc:
        print(f"infeasible computation: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
