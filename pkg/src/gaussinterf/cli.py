"""Command-line front end: ``run`` a JSON config, ``reproduce`` a figure preset, ``expect`` intensities.

A config is one flat JSON object.  Keys (all optional, defaults shown by
``gaussinterf run --help``):

* ``scheme``: ``passive`` | ``active`` | ``direct``; ``mu``; ``r``; ``r2``
* source: ``R`` and ``D``; or ``V`` with ``thermal_ratio`` (R^2/V);
  or a thermal pair ``V1`` with ``V2`` (or ``V2_ratio``)
* process: ``q``, ``Phi``, ``d``, ``alpha``, ``beta``
* ``channel_noise`` / ``process_noise``: ``{"T": .., "Veps": ..}`` or null
* ``efficiency``, ``shots``, ``blocks``, ``seed``, ``threads``, ``shot_model``
* ``estimator``: one of the pipeline names; ``Veps_assumed``;
  ``calibration_shots``; ``targets``
* ``sweep``: ``{"param": name, "values": [...]}``; ``out``
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from typing import Any, Optional

from . import __version__
from .core import NoiseChannel, Source
from .interferometer.expected import expected_active, expected_direct, expected_passive
from .interferometer.oracle import oracle_direct, oracle_expected
from .interferometer.setup import ProcessParams, SchemeConfig
from .pipelines import PIPELINES, make_pipeline
from .statistics import (
    TooManyFailures,
    cramer_rao_bound,
    empirical_mse,
    fisher_information_normal,
    qhat_normal_approx,
)

HEADER = [
    "sweep_param", "sweep_value", "target", "truth", "mse", "bias", "variance",
    "approx_variance", "cr_bound", "n_shots", "n_blocks", "clamp_fraction", "seed",
]

DEFAULTS: dict[str, Any] = {
    "scheme": "passive",
    "mu": 0.3,
    "r": 0.5,
    "r2": None,
    "R": 5.0,
    "D": 10.0,
    "q": 1.23,
    "Phi": 0.63,
    "d": 1.67,
    "alpha": 0.0,
    "beta": 0.0,
    "channel_noise": None,
    "process_noise": None,
    "efficiency": 1.0,
    "shots": 10_000,
    "blocks": 1000,
    "seed": 0,
    "threads": 1,
    "shot_model": "auto",
    "estimator": "ideal",
    "Veps_assumed": 1.0,
    "calibration_shots": None,
    "targets": None,
    "sweep": None,
    "out": None,
    "label": None,
}
SOURCE_KEYS = ("V", "thermal_ratio", "V1", "V2", "V2_ratio")
NOISE_SWEEPS = {"channel_T": ("channel_noise", "T"), "channel_Veps": ("channel_noise", "Veps"),
                "process_T": ("process_noise", "T"), "process_Veps": ("process_noise", "Veps")}
SWEEPABLE = {"mu", "r", "r2", "R", "D", "q", "Phi", "d", "alpha", "beta", "V", "thermal_ratio",
             "V1", "V2", "V2_ratio", "shots", "efficiency", "Veps_assumed"} | set(NOISE_SWEEPS)
INTEGER_KEYS = {"shots", "blocks", "seed", "threads"}


class ConfigError(ValueError):
    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        super().__init__(message)
        self.key = key
        self.line = line


def _line_of(text: Optional[str], key: Optional[str]) -> Optional[int]:
    if not text or not key:
        return None
    needle = f'"{key}"'
    for n, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return n
    return None


@dataclass(frozen=True)
class Point:
    """One fully resolved simulation point of a run."""

    scheme: SchemeConfig
    process: ProcessParams
    sources: tuple[Source, ...]
    shots: int


class RunConfig:
    """Validated view of a flat config mapping; ``text`` locates errors by line."""

    def __init__(self, raw: dict, text: Optional[str] = None):
        unknown = set(raw) - set(DEFAULTS) - set(SOURCE_KEYS)
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(f"unknown config key {key!r}", key, _line_of(text, key))
        self.raw = {**DEFAULTS, **raw}
        self.text = text
        self._check()

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object", line=1)
        return cls(raw, text)

    def __getitem__(self, key):
        return self.raw[key]

    def override(self, **kw) -> "RunConfig":
        return RunConfig({k: v for k, v in {**self.raw, **kw}.items() if k in self.raw or v is not None}, self.text)

    def _fail(self, key: str, message: str):
        raise ConfigError(message, key, _line_of(self.text, key))

    def _check(self):
        c = self.raw
        if c["scheme"] not in ("passive", "active", "direct"):
            self._fail("scheme", f"scheme must be passive, active or direct, not {c['scheme']!r}")
        if c["estimator"] not in PIPELINES:
            self._fail("estimator", f"estimator must be one of {', '.join(PIPELINES)}")
        if c["shot_model"] not in ("auto", "direct", "moments"):
            self._fail("shot_model", "shot_model must be auto, direct or moments")
        for key in INTEGER_KEYS:
            v = c[key]
            if isinstance(v, bool) or not isinstance(v, int) or v < (0 if key == "seed" else 1):
                self._fail(key, f"{key} must be a {'non-negative' if key == 'seed' else 'positive'} integer")
        cal = c["calibration_shots"]
        if cal is not None and (isinstance(cal, bool) or not isinstance(cal, int) or cal < 1):
            self._fail("calibration_shots", "calibration_shots must be null or a positive integer")
        if c["blocks"] < 2:
            self._fail("blocks", "blocks must be >= 2 to estimate an MSE")
        for key in ("channel_noise", "process_noise"):
            block = c[key]
            if block is not None and (not isinstance(block, dict) or set(block) - {"T", "Veps"} or "T" not in block):
                self._fail(key, f"{key} must be null or an object with keys T and Veps")
        if c["targets"] is not None and not (
            isinstance(c["targets"], list) and set(c["targets"]) <= {"Phi", "q", "d"}
        ):
            self._fail("targets", "targets must be a list drawn from Phi, q, d")
        sweep = c["sweep"]
        if sweep is not None:
            if not isinstance(sweep, dict) or set(sweep) != {"param", "values"}:
                self._fail("sweep", "sweep must be an object with keys param and values")
            if sweep["param"] not in SWEEPABLE:
                self._fail("sweep", f"cannot sweep {sweep['param']!r}; sweepable: {', '.join(sorted(SWEEPABLE))}")
            if not isinstance(sweep["values"], list) or not sweep["values"]:
                self._fail("sweep", "sweep values must be a non-empty list")
        # resolve every point now so range errors surface before any simulation
        for value in self.sweep_values():
            try:
                point = self.point(value)
                if c["scheme"] != "direct":
                    # dry construction catches degenerate layouts and missing sources
                    v = self.values_at(value)
                    make_pipeline(v["estimator"], point.scheme, point.process, point.sources, point.shots,
                                  2, v["Veps_assumed"], v["calibration_shots"])
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                key = sweep["param"] if sweep is not None else self._guess_key(str(exc))
                self._fail(key, f"{key}: {exc}" if sweep is None else f"sweep {key}={value}: {exc}")

    def _guess_key(self, message: str) -> str:
        if "pipeline" in message:
            return "estimator"
        if "OPA gain" in message:
            return "r"
        for key in list(c for c in self.raw if self.raw[c] is not None):
            if message.startswith(f"{key}=") or f" {key}=" in message or message.startswith(key):
                return key
        return "scheme"

    @property
    def sweep_param(self) -> str:
        return self.raw["sweep"]["param"] if self.raw["sweep"] else ""

    def sweep_values(self) -> list:
        return list(self.raw["sweep"]["values"]) if self.raw["sweep"] else [None]

    def values_at(self, value) -> dict:
        c = dict(self.raw)
        if value is None:
            return c
        param = self.sweep_param
        if param in NOISE_SWEEPS:
            block, field = NOISE_SWEEPS[param]
            base = dict(c[block] or {"T": 1.0, "Veps": 1.0})
            base[field] = value
            c[block] = base
        else:
            c[param] = int(value) if param == "shots" else value
        return c

    def point(self, value=None) -> Point:
        c = self.values_at(value)
        noise = {}
        for k in ("channel_noise", "process_noise"):
            try:
                noise[k] = None if c[k] is None else NoiseChannel(c[k]["T"], c[k].get("Veps", 1.0))
            except (TypeError, ValueError) as exc:
                if self.raw["sweep"] is None:
                    self._fail(k, f"{k}: {exc}")
                raise
        if c["scheme"] == "active":
            scheme = SchemeConfig.active(c["r"], c["r2"], efficiency=c["efficiency"], **noise)
        else:
            scheme = SchemeConfig.passive(c["mu"], efficiency=c["efficiency"], **noise)
        process = ProcessParams(c["q"], c["Phi"], c["d"], c["alpha"], c["beta"])
        return Point(scheme, process, _sources(c), int(c["shots"]))


def _sources(c: dict) -> tuple[Source, ...]:
    if c.get("V1") is not None:
        V1 = c["V1"]
        V2 = c.get("V2") if c.get("V2") is not None else c.get("V2_ratio", 4.0) * V1
        return Source.thermal(V1), Source.thermal(V2)
    if c.get("V") is not None:
        V, ratio = c["V"], c.get("thermal_ratio", 1.0)
        if not 0.0 < ratio <= 1.0:
            raise ValueError(f"thermal_ratio={ratio} outside (0, 1]")
        return (Source(math.sqrt(ratio * V), math.sqrt(2.0 * V * (1.0 - ratio))),)
    return (Source(c["R"], c["D"]),)


def analytic_columns(cfg: dict, point: Point, target: str) -> tuple[Optional[float], Optional[float]]:
    """Normal-approximation variance and Cramer-Rao bound for ``q``.

    Only defined for the noiseless passive scheme with a thermal source,
    no displacement and the fringe aligned with a reference setting, where
    the closed forms hold.
    """
    p, src = point.process, point.sources[0]
    aligned = min(p.Phi % (math.pi / 2), math.pi / 2 - p.Phi % (math.pi / 2)) < 1e-12
    if (
        target != "q"
        or cfg["scheme"] != "passive"
        or cfg["estimator"] not in ("ideal", "naive")
        or point.scheme.channel_noise is not None
        or point.scheme.process_noise is not None
        or src.D != 0.0
        or p.d != 0.0
        or not aligned
        or src.V <= 1.0
    ):
        return None, None
    mu = point.scheme.splitter.mu
    approx = qhat_normal_approx(p.q, src.V, mu, point.shots).q_var
    cr = cramer_rao_bound(fisher_information_normal(p.q, src.V, mu, point.shots))
    return approx, cr


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "inf" if math.isinf(x) else repr(x)
    return str(x)


def run_config(cfg: RunConfig, rows: list, label: Optional[str] = None, log=None) -> None:
    """Simulate every sweep point of ``cfg`` and append CSV rows to ``rows``."""
    if cfg["scheme"] == "direct":
        raise ConfigError("the direct scheme has no estimator; use the expect command", "scheme", _line_of(cfg.text, "scheme"))
    label = label if label is not None else cfg["label"]
    for value in cfg.sweep_values():
        point = cfg.point(value)
        c = cfg.values_at(value)
        pl = make_pipeline(
            c["estimator"], point.scheme, point.process, point.sources, point.shots, c["blocks"], c["Veps_assumed"],
            c["calibration_shots"],
        )
        truth = pl.truth if c["targets"] is None else {k: v for k, v in pl.truth.items() if k in c["targets"]}
        results = empirical_mse(
            point.scheme, point.process, pl.plan, pl.estimator, c["seed"], truth, c["threads"], c["shot_model"]
        )
        for target, res in results.items():
            approx, cr = analytic_columns(c, point, target)
            name = target if not label else f"{label}:{target}"
            rows.append([
                cfg.sweep_param, "" if value is None else value, name, res.truth, res.mse, res.bias,
                res.variance, approx, cr, res.shots, res.blocks, res.clamp_fraction, res.seed,
            ])
            if log is not None:
                print(f"{cfg.sweep_param or '-'}={'' if value is None else value} {name}: mse={res.mse:.4g} "
                      f"bias={res.bias:.3g} failures={res.failures}", file=log)


def write_csv(rows: list, path: Optional[str], stream=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    text = buf.getvalue()
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    elif stream is not None:
        stream.write(text)
    return text


# -- figure presets ---------------------------------------------------------

FIG2 = {"R": 5.0, "D": 10.0, "q": 1.23, "Phi": 0.63, "d": 1.67}
N_GRID = [1000, 10_000, 100_000, 1_000_000]


def _sweep(param, values):
    return {"param": param, "values": list(values)}


def preset(name: str) -> list[dict]:
    """Configs (each optionally labelled) whose rows make up figure ``name``."""
    mus = [round(0.05 * k, 2) for k in range(1, 20)]
    ratios = [0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
    energies = [2, 5, 10, 20, 50, 100, 200, 500, 1000]
    bs = {"scheme": "passive", "mu": 0.3, "label": "BS"}
    opa = {"scheme": "active", "r": 0.5, "label": "OPA"}
    if name == "fig2a":
        return [{**FIG2, "scheme": "passive", "sweep": _sweep("mu", mus)}]
    if name == "fig2b":
        rs = [round(0.1 * k, 1) for k in range(1, 16)]
        return [{**FIG2, "scheme": "active", "sweep": _sweep("r", rs)}]
    if name == "fig3":
        return [{**FIG2, **el, "sweep": _sweep("shots", N_GRID)} for el in (bs, opa)]
    if name == "fig4a":
        base = {k: FIG2[k] for k in ("q", "Phi", "d")}
        return [{**base, **el, "V": 100.0, "sweep": _sweep("thermal_ratio", ratios)} for el in (bs, opa)]
    if name == "fig4b":
        base = {k: FIG2[k] for k in ("q", "Phi", "d")}
        return [{**base, **el, "thermal_ratio": 2.0 / 3.0, "V": 10.0, "sweep": _sweep("V", energies)} for el in (bs, opa)]
    if name == "fig5":
        noise = {"process_noise": {"T": 0.9, "Veps": 1.1}, "channel_noise": {"T": 0.7, "Veps": 1.3}}
        return [
            {**FIG2, **noise, "scheme": "passive", "estimator": "combined", "V1": V1, "V2_ratio": 4.0,
             "targets": ["q"], "label": f"V1={V1:g}", "sweep": _sweep("shots", N_GRID)}
            for V1 in (10.0, 1000.0)
        ]
    if name == "supp7":
        return [{"scheme": "passive", "mu": 0.2, "R": 5.0, "D": 0.0, "q": 3.0, "Phi": 0.0, "d": 0.0,
                 "targets": ["q"], "sweep": _sweep("shots", [100, 300, 1000, 3000, 10_000, 30_000, 100_000])}]
    if name == "supp8":
        noise = {"channel_noise": {"T": 0.9, "Veps": 1.1}}
        return [
            {**FIG2, **noise, **el, "estimator": est, "label": f"{el['label']}/{est}", "sweep": _sweep("shots", N_GRID)}
            for el in (bs, opa)
            for est in ("naive", "channel-calibrated", "known-channel")
        ]
    if name == "supp9":
        noise = {"process_noise": {"T": 0.9, "Veps": 1.1}}
        base = {k: FIG2[k] for k in ("q", "Phi", "d")}
        return [
            {**base, **noise, **el, "V1": 75.0, "V2": 300.0, "estimator": est,
             "label": f"{el['label']}/{est}", "sweep": _sweep("shots", N_GRID)}
            for el in (bs, opa)
            for est in ("naive", "two-source", "known-process")
        ]
    raise KeyError(name)


PRESETS = ("fig2a", "fig2b", "fig3", "fig4a", "fig4b", "fig5", "supp7", "supp8", "supp9")


# -- expect -----------------------------------------------------------------

def expect_table(cfg: RunConfig) -> list[tuple]:
    """Rows ``(term, printed, closed_form, oracle, deviation, status)``.

    ``printed`` is the published expression, ``closed_form`` the one this
    package uses, ``deviation`` the relative gap of ``printed`` to the
    oracle.
    """
    point = cfg.point(cfg.sweep_values()[0])
    p, scheme = point.process, point.scheme
    rows = []

    def add(term, printed, closed, oracle):
        dev = abs(printed - oracle) / max(1.0, abs(oracle))
        status = "ok" if dev < 1e-9 else "printed form differs from oracle"
        rows.append((term, printed, closed, oracle, dev, status))

    if cfg["scheme"] == "direct":
        for k, src in enumerate(point.sources):
            add(f"<i> V={src.V:g}", expected_direct(src.V, p.q, p.d, "printed"),
                expected_direct(src.V, p.q, p.d), oracle_direct(p, src))
        return rows
    ch, pn, eta = scheme.channel_noise, scheme.process_noise, scheme.efficiency
    for src in point.sources:
        for phi_ref, tag in ((0.0, "0"), (math.pi / 2, "pi/2")):
            if cfg["scheme"] == "passive":
                mu = scheme.splitter.mu
                printed = closed = expected_passive(p, src.V, mu, phi_ref, ch, pn, eta)
            else:
                r1, r2 = scheme.splitter.r, scheme.combiner.r
                printed = expected_active(p, src.V, r1, r2, phi_ref, ch, pn, eta, form="printed")
                closed = expected_active(p, src.V, r1, r2, phi_ref, ch, pn, eta)
            oracle = oracle_expected(scheme, p, src, phi_ref)
            for i, term in enumerate(("<i->", "<i+>")):
                add(f"{term} V={src.V:g} phi_ref={tag}", printed[i], closed[i], oracle[i])
        if ch is not None and cfg["scheme"] == "passive":
            mu, V, T, Ve = scheme.splitter.mu, src.V, ch.T, ch.Veps
            oracle = oracle_expected(scheme, p, src, 0.0, with_process=False)
            amp = eta * T * (V - 1.0) * math.sqrt(mu * (1.0 - mu))
            add(f"<i-> calibration V={V:g}", amp, amp, oracle[0])
            printed = eta * (T * V / 2.0 + Ve * (1.0 - T) - 1.0)
            closed = eta * (T * (V + 1.0) / 2.0 + Ve * (1.0 - T) - 1.0)
            add(f"<i+> calibration V={V:g}", printed, closed, oracle[1])
    return rows


def _print_expect(rows, stream):
    cols = ("term", "printed", "closed_form", "oracle", "rel_dev", "status")
    print("  ".join(f"{c:>14}" if i else f"{c:<30}" for i, c in enumerate(cols)), file=stream)
    for term, a, b, o, dev, status in rows:
        print(f"{term:<30}  {a:>14.8g}  {b:>14.8g}  {o:>14.8g}  {dev:>14.3e}  {status}", file=stream)


# -- entry point ------------------------------------------------------------

def _load(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig({})
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return RunConfig.from_text(text)


def _cli_overrides(args) -> dict:
    out = {}
    for key in ("seed", "blocks", "shots", "threads"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = v
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaussinterf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", metavar="PATH", required=config_required, help="JSON run config")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--blocks", type=int, help="Monte-Carlo blocks M")
        p.add_argument("--shots", type=int, help="shots N per setting")
        p.add_argument("--out", metavar="PATH", help="CSV output path (default: standard output)")
        p.add_argument("--threads", type=int, help="worker threads over blocks")

    run = sub.add_parser("run", help="simulate a config and write MSE rows as CSV")
    common(run)
    rep = sub.add_parser("reproduce", help="run a baked-in figure preset")
    rep.add_argument("figure", help=f"one of {', '.join(PRESETS)}")
    common(rep)
    rep.add_argument("--full", action="store_true", help="use 10^4 blocks instead of 10^3")
    exp = sub.add_parser("expect", help="printed vs oracle mean intensities")
    exp.add_argument("--config", metavar="PATH", help="JSON run config")
    return parser


def _error(prog: str, path: Optional[str], exc: ConfigError) -> int:
    where = f"{path or '<config>'}:{exc.line}: " if exc.line else f"{path or '<config>'}: "
    print(f"{prog}: error: {where}{exc}", file=sys.stderr)
    return 2


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    prog = parser.prog
    try:
        if args.command == "expect":
            _print_expect(expect_table(_load(args.config)), sys.stdout)
            return 0
        rows: list = []
        if args.command == "run":
            cfg = _load(args.config)
            cfg = cfg.override(**_cli_overrides(args))
            run_config(cfg, rows, log=sys.stderr)
        else:
            if args.figure not in PRESETS:
                print(f"{prog}: error: unknown figure {args.figure!r}; available: {', '.join(PRESETS)}", file=sys.stderr)
                return 2
            overrides = {"blocks": 10_000 if args.full else 1000, **_cli_overrides(args)}
            for raw in preset(args.figure):
                cfg = RunConfig({**raw, **overrides})
                run_config(cfg, rows, log=sys.stderr)
        write_csv(rows, args.out, sys.stdout)
        if args.out:
            print(f"wrote {len(rows)} rows to {args.out}", file=sys.stderr)
        return 0
    except ConfigError as exc:
        return _error(prog, getattr(args, "config", None), exc)
    except TooManyFailures as exc:
        print(f"{prog}: error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"{prog}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
