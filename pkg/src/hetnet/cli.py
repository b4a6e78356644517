"""``hetnet`` command-line driver.

Every command writes one CSV with the columns in :data:`COLUMNS`, preceded by
``#`` comment lines holding the resolved scenario. Exit codes: 0 success,
2 invalid input, 3 solver or quadrature failure (details in ``<out>.log``).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coverage import DEFAULT_GRID_DB, Tier, avg_rate, coverage, mean_channels
from .design import critical_density_case1, critical_density_numerical
from .load import SolverError, activity_linear, solve_activity
from .montecarlo import SimulationWindow, default_threads, estimate_activity, estimate_coverage
from .scenario import (
    Mode, Scenario, ScenarioError, ScenarioFileError, dump_scenario,
    load_scenario, validate,
)
from .special import QuadratureError

log = logging.getLogger("hetnet")

COLUMNS = ("scenario_id", "mode", "tier", "axis", "axis_value", "threshold_db", "value",
           "ci_low", "ci_high", "zeta", "n_bar", "source", "seed", "trials")
COMMANDS = ("analytic", "simulate", "compare", "sweep", "activity", "critical-point")
AXES = ("r_m", "lambda_M", "lambda_F", "N_F", "beta")
METRICS = ("coverage", "rate")
EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3


class UsageError(ValueError):
    pass


@dataclass
class JobSpec:
    command: str
    scenario_path: str | None = None
    out: str = "-"
    seed: int = 0
    trials: int = 10_000
    threads: int = 1
    axis: str | None = None
    range: str | None = None
    modes: tuple[str, ...] = ()
    tiers: tuple[str, ...] = ("mu", "fu")
    zeta: float | None = None
    metric: str = "coverage"
    thresholds: str | None = None
    overrides: dict = field(default_factory=dict)
    preset: str | None = None


PRESETS: dict[str, dict] = {
    "fig3": dict(command="activity", axis="lambda_M", range="0.0001:0.004:0.0001",
                 overrides={"lambda_F": 1e-4}),
    "fig4": dict(command="compare", axis="beta", range="-10:25:1", overrides={"lambda_F": 1e-4}),
    "fig5": dict(command="activity", axis="lambda_M", range="0.0002:0.004:0.0002",
                 overrides={"r_m": 60.0}),
    "fig6a": dict(command="sweep", axis="r_m", range="0:120:10", modes=("cochannel",),
                  overrides={"lambda_F": 1e-4}),
    "fig6b": dict(command="sweep", axis="lambda_M", range="0.0002:0.004:0.0002", modes=("cochannel",)),
    "fig6c": dict(command="sweep", axis="lambda_F", range="0.00001:0.0004:0.00001", modes=("cochannel",)),
    "fig7": dict(command="sweep", axis="r_m", range="0:120:10", metric="rate", modes=("cochannel",),
                 overrides={"lambda_B": 1e-5}),
    "fig8": dict(command="sweep", axis="N_F", range="1:19:1",
                 modes=("cochannel", "orthogonal", "partial"), overrides={"lambda_F": 1e-4, "r_m": 70.0}),
    "fig9": dict(command="sweep", axis="r_m", range="0:120:10",
                 modes=("cochannel", "orthogonal", "partial"), overrides={"lambda_F": 1e-4}),
    "fig10": dict(command="sweep", axis="lambda_F", range="0.00001:0.0004:0.00001", tiers=("mu",),
                  modes=("cochannel", "orthogonal", "partial")),
}
POWER_NOTE = "transmit powers are chosen defaults (P_B 46 dBm, P_F 20 dBm, wall loss 10 dB)"


def preset(name: str) -> JobSpec:
    """JobSpec reproducing one of the figure sweeps."""
    try:
        spec = PRESETS[name]
    except KeyError:
        raise UsageError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    return JobSpec(preset=name, **{k: (dict(v) if isinstance(v, dict) else v) for k, v in spec.items()})


def parse_range(text: str) -> np.ndarray:
    """LO:HI:STEP inclusive of HI; empty when HI < LO."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"range must be LO:HI:STEP, got {text!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"range must be numeric LO:HI:STEP, got {text!r}") from None
    if not step > 0:
        raise UsageError(f"range step must be positive, got {step!r}")
    if hi < lo:
        return np.empty(0)
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return ""
    return format(value, ".10g")


class _Writer:
    def __init__(self, scenario: Scenario, job: JobSpec):
        self.buffer = io.StringIO()
        for line in dump_scenario(scenario).splitlines():
            self.buffer.write(f"# {line}\n")
        self.buffer.write(f"# command = {job.command}\n")
        if job.preset:
            self.buffer.write(f"# preset = {job.preset}\n")
        self.buffer.write(f"# note = {POWER_NOTE}\n")
        self.writer = csv.writer(self.buffer, lineterminator="\n")
        self.writer.writerow(COLUMNS)
        self.scenario_id = scenario.name

    def row(self, mode, tier, axis, axis_value, threshold_db, value, ci=(None, None),
            zeta=None, n_bar=None, source="analytic", seed=None, trials=None):
        mode = mode.value if isinstance(mode, Mode) else mode
        tier = tier.value if isinstance(tier, Tier) else tier
        self.writer.writerow([
            self.scenario_id, mode, tier, axis, _fmt(axis_value), _fmt(threshold_db), _fmt(value),
            _fmt(ci[0]), _fmt(ci[1]), _fmt(zeta), _fmt(n_bar), source, _fmt(seed), _fmt(trials),
        ])

    def text(self) -> str:
        return self.buffer.getvalue()


# --- job execution -----------------------------------------------------------

def _apply_axis(scenario: Scenario, axis: str, value: float) -> Scenario:
    if axis == "N_F":
        return scenario.replace(n_f=int(round(value)))
    if axis == "beta":
        return scenario
    return scenario.replace(**{axis: float(value)})


def _threshold_db(scenario: Scenario, tier: Tier) -> float:
    beta = scenario.spectrum.beta_M if tier is Tier.MU else scenario.spectrum.beta_F
    return 10 * math.log10(beta)


def _operating_point(scenario: Scenario, mode: Mode, job: JobSpec):
    """(zeta, n_bar) for a scenario: the fixed point unless zeta is pinned."""
    if job.zeta is not None:
        return job.zeta, mean_channels(scenario, job.zeta, mode)
    sol = solve_activity(scenario, mode)
    return sol.zeta, sol.n_bar


def _window(scenario: Scenario, job: JobSpec) -> SimulationWindow:
    return SimulationWindow.for_scenario(scenario, seed=job.seed, trials=job.trials, threads=job.threads)


def _curves(w: _Writer, scenario: Scenario, job: JobSpec, analytic: bool, simulated: bool):
    grid = parse_range(job.range) if job.range else (
        parse_range(job.thresholds) if job.thresholds else DEFAULT_GRID_DB)
    if len(grid) == 0:
        return
    beta = 10.0 ** (grid / 10.0)
    for mode in _modes(job, scenario):
        sc = validate(scenario.replace(mode=mode))
        zeta, n_bar = _operating_point(sc, mode, job)
        for tier in map(Tier.parse, job.tiers):
            rows = {}
            if analytic:
                values = np.atleast_1d(coverage(sc, tier, zeta, beta, mode))
                rows["analytic"] = [(v, (None, None)) for v in values]
            if simulated:
                curve = estimate_coverage(sc, tier, zeta, grid, _window(sc, job), mode)
                rows["montecarlo"] = list(zip(curve.values, zip(curve.ci_low, curve.ci_high)))
            for i, t in enumerate(grid):
                for source, values in rows.items():
                    v, ci = values[i]
                    mc = source == "montecarlo"
                    w.row(mode, tier, "beta", t, t, v, ci, zeta, n_bar, source,
                          job.seed if mc else None, job.trials if mc else None)


def _modes(job: JobSpec, scenario: Scenario) -> list[Mode]:
    if not job.modes:
        return [scenario.spectrum.mode]
    if "all" in job.modes:
        return list(Mode)
    return [Mode.parse(m) for m in job.modes]


def _sweep(w: _Writer, scenario: Scenario, job: JobSpec):
    axis = job.axis or "r_m"
    if axis == "beta":
        return _curves(w, scenario, job, analytic=True, simulated=False)
    values = parse_range(job.range) if job.range else np.array([_axis_default(scenario, axis)])
    for mode in _modes(job, scenario):
        for x in values:
            sc = validate(_apply_axis(scenario.replace(mode=mode), axis, x))
            if job.metric == "rate":
                zeta = 1.0 if job.zeta is None else job.zeta
                for tier in map(Tier.parse, job.tiers):
                    w.row(mode, tier, axis, x, None, avg_rate(sc, tier, mode, zeta=zeta), zeta=zeta,
                          source="analytic")
                continue
            zeta, n_bar = _operating_point(sc, mode, job)
            for tier in map(Tier.parse, job.tiers):
                t_db = _threshold_db(sc, tier)
                w.row(mode, tier, axis, x, t_db, coverage(sc, tier, zeta, None, mode), zeta=zeta,
                      n_bar=n_bar)


def _axis_default(scenario: Scenario, axis: str) -> float:
    return {
        "r_m": scenario.spectrum.r_m,
        "lambda_M": scenario.traffic.lambda_M,
        "lambda_F": scenario.network.lambda_F,
        "N_F": scenario.spectrum.n_f,
    }[axis]


def _activity(w: _Writer, scenario: Scenario, job: JobSpec):
    axis = job.axis or "lambda_M"
    if axis == "beta":
        raise UsageError("activity cannot sweep the beta axis")
    values = parse_range(job.range) if job.range else np.array([_axis_default(scenario, axis)])
    for mode in _modes(job, scenario):
        for x in values:
            sc = validate(_apply_axis(scenario.replace(mode=mode), axis, x))
            sol = solve_activity(sc, mode)
            w.row(mode, "mbs", axis, x, None, sol.zeta, zeta=sol.zeta, n_bar=sol.n_bar, source="analytic")
            linear = activity_linear(sc, sol.n_bar, mode) if sol.n_bar > 0 else 0.0
            w.row(mode, "mbs", axis, x, None, linear, n_bar=sol.n_bar, source="linear")
            est = estimate_activity(sc, job.trials, job.seed, mode, n_bar=sol.n_bar)
            w.row(mode, "mbs", axis, x, None, est.zeta, (est.ci_low, est.ci_high), n_bar=sol.n_bar,
                  source="montecarlo", seed=job.seed, trials=job.trials)


def _critical(w: _Writer, scenario: Scenario, job: JobSpec):
    axis = job.axis or "r_m"
    if axis == "beta":
        raise UsageError("critical-point cannot sweep the beta axis")
    values = parse_range(job.range) if job.range else np.array([_axis_default(scenario, axis)])
    for x in values:
        sc = validate(_apply_axis(scenario, axis, x))
        closed = critical_density_case1(sc)
        w.row(Mode.COCHANNEL, "mu", axis, x, _threshold_db(sc, Tier.MU), closed.lambda_f_c_star,
              source="closed_form")
        num = critical_density_numerical(sc)
        if not num.found:
            log.info("axis %s=%g: %s", axis, x, num.note)
        w.row(Mode.COCHANNEL, "mu", axis, x, _threshold_db(sc, Tier.MU), num.lambda_f_c_star,
              source="numerical")


def run(job: JobSpec) -> str:
    """Execute a job and return the CSV text."""
    if job.command not in COMMANDS:
        raise UsageError(f"unknown command {job.command!r}")
    if job.axis is not None and job.axis not in AXES:
        raise UsageError(f"axis must be one of {', '.join(AXES)}")
    if job.metric not in METRICS:
        raise UsageError(f"metric must be one of {', '.join(METRICS)}")
    if job.trials < 1 or job.threads < 1:
        raise UsageError("trials and threads must be >= 1")
    scenario = load_scenario(job.scenario_path) if job.scenario_path else Scenario()
    if job.overrides:
        scenario = scenario.replace(**job.overrides)
    validate(scenario)
    for tier in job.tiers:
        Tier.parse(tier)
    w = _Writer(scenario, job)
    if job.command in ("analytic", "simulate", "compare"):
        if job.axis not in (None, "beta"):
            raise UsageError(f"{job.command} only sweeps the beta axis; use 'sweep' for {job.axis}")
        _curves(w, scenario, job, analytic=job.command != "simulate",
                simulated=job.command != "analytic")
    elif job.command == "sweep":
        _sweep(w, scenario, job)
    elif job.command == "activity":
        _activity(w, scenario, job)
    else:
        _critical(w, scenario, job)
    return w.text()


# --- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hetnet", description="Two-tier femtocell coverage and load analysis.")
    p.add_argument("command", nargs="?", choices=COMMANDS,
                   help="job to run (optional with --preset)")
    p.add_argument("--scenario", help="scenario file (key = value lines)")
    p.add_argument("--out", default="-", help="output CSV path, '-' for stdout")
    p.add_argument("--seed", type=int, help="Monte Carlo seed")
    p.add_argument("--trials", type=int, help="Monte Carlo trials (or sampled cells)")
    p.add_argument("--threads", type=int, help="worker threads (default: available CPUs)")
    p.add_argument("--axis", choices=AXES, help="sweep axis")
    p.add_argument("--range", help="sweep range LO:HI:STEP (dB for beta)")
    p.add_argument("--mode", help="cochannel, orthogonal, partial or all (comma list allowed)")
    p.add_argument("--preset", help="figure preset: " + ", ".join(PRESETS))
    p.add_argument("--tier", help="mu, fu or both")
    p.add_argument("--zeta", type=float, help="pin the macro activity instead of solving for it")
    p.add_argument("--metric", choices=METRICS, help="sweep output (coverage or average rate)")
    p.add_argument("--thresholds", help="threshold grid LO:HI:STEP in dB for curve commands")
    return p


def job_from_args(args: argparse.Namespace) -> JobSpec:
    if args.preset:
        job = preset(args.preset)
        if args.command and args.command != job.command:
            raise UsageError(f"preset {args.preset} runs '{job.command}', not '{args.command}'")
    elif args.command:
        job = JobSpec(command=args.command)
    else:
        raise UsageError("give a command or --preset")
    job.threads = default_threads()
    for name in ("seed", "trials", "threads", "axis", "range", "zeta", "metric", "thresholds"):
        value = getattr(args, name)
        if value is not None:
            setattr(job, name, value)
    job.scenario_path = args.scenario
    job.out = args.out
    if args.mode:
        job.modes = tuple(m.strip() for m in args.mode.split(",") if m.strip())
        for m in job.modes:
            if m != "all":
                Mode.parse(m)
    if args.tier:
        job.tiers = ("mu", "fu") if args.tier == "both" else (args.tier,)
    if job.zeta is not None and not 0 <= job.zeta <= 1:
        raise UsageError("zeta must lie in [0, 1]")
    return job


def _configure_logging():
    level = os.environ.get("HETNET_LOG", "error").strip().lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _emit(text: str, out: str):
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, newline="")


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    out = args.out
    try:
        job = job_from_args(args)
        text = run(job)
    except ScenarioFileError as exc:
        for err in exc.errors:
            print(f"hetnet: {args.scenario}: {err}", file=sys.stderr)
        return EXIT_INVALID
    except (QuadratureError, SolverError) as exc:
        sidecar = (out if out != "-" else "hetnet") + ".log"
        Path(sidecar).write_text(f"{type(exc).__name__}: {exc}\n\n{traceback.format_exc()}")
        print(f"hetnet: solver failure: {exc} (details in {sidecar})", file=sys.stderr)
        return EXIT_SOLVER
    except (ScenarioError, UsageError, ValueError, KeyError, OSError) as exc:
        print(f"hetnet: {exc}", file=sys.stderr)
        return EXIT_INVALID
    _emit(text, out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
