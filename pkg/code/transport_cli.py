#!/usr/bin/env python3
"""
transport_cli.py
---------------------------
Command-line front end. Every subcommand reads a JSON run config, fans its
independent checks out over a thread pool and writes a report directory
(see run_report.py).

    transport               apply I^gamma_{s->t} to configured (or sampled) elements
    check                   law and axiom suites on every configured path
    factorize               factorization round trips, anchor sweeps, finite-fibre oracles
    holonomy                holonomy of connection loops against closed forms, RK4 convergence
    reconstruct-horizontal  horizontal spaces recovered from a transport, and the lift conditions

Usage:
    python code/transport_cli.py check --config configs/negative_control.json --out ./data/negative

Exit codes: 0 every check passed, 1 some check failed (or the run was
interrupted), 2 the config could not be loaded or resolved.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import pandas as pd

import config
from bundle_models import FiberElement, finite_bundle
from connection_engine import (
    DegenerateEstimateError, Probe, check_c1_smoothness, check_complementarity, check_horizontal_agreement,
    check_initial_uniqueness, check_linearization, convergence_study, holonomy, horizontal_space_from_transport,
    line_probe, lift_via_transport, norm_drift, principal_angles, analytic_horizontal_space, sphere_frame,
)
from example_transports import check_path_independence
from factorization import (
    anchor_sweep, factorize, finite_round_trip, gauge_recovery, permutation_tables, random_bijection_family,
    reconstruct_residual,
)
from law_reports import LawAccumulator, LawReport, SuiteReport
from parallel_bridge import (
    check_axioms, check_case_split, continuity_smoke, parallel_lift_conditions, round_trip_T, round_trip_psi,
    to_parallel, to_transport,
)
from path_algebra import Interval, PathSpec, analytic_path, uniform_grid
from run_config import (
    COMMANDS, ConfigError, RunSetup, TransportTask, load_config, resolve, unit_domain_fraction,
)
from run_report import Result, RunReport
from transport_core import is_parallel_transport_along_paths, transport_suite

logger = logging.getLogger(__name__)


@dataclass
class Outcome:
    result: Result
    tables: dict[str, pd.DataFrame] = field(default_factory=dict)
    note: Optional[dict] = None


Job = tuple[str, Callable[[], Outcome]]


def run_jobs(report: RunReport, jobs: list[Job], max_workers: int = config.MAX_WORKERS) -> RunReport:
    """Run independent checks in parallel; the report orders them by check id."""

    def timed(fn):
        t0 = time.perf_counter()
        try:
            return fn(), None, time.perf_counter() - t0
        except (ValueError, ArithmeticError, KeyError) as e:
            return None, e, time.perf_counter() - t0

    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        # map each future back to its job index
        future_to_idx = {executor.submit(timed, fn): idx for idx, (_, fn) in enumerate(jobs)}
        for fut in as_completed(future_to_idx):
            check_id = jobs[future_to_idx[fut]][0]
            outcome, err, seconds = fut.result()
            if err is not None:
                logger.error(f"{check_id} failed to run: {err}")
                report.add_error(check_id, f"{type(err).__name__}: {err}", seconds)
                continue
            report.add(check_id, outcome.result, seconds, outcome.note)
            for name, frame in outcome.tables.items():
                report.add_table(name, frame)
            logger.info(f"{check_id}: {'pass' if outcome.result.passed else 'FAIL'} ({seconds:.2f}s)")
    for name, frame in report.tables.items():
        # completion order is arbitrary; tables are sorted like the report
        report.tables[name] = frame.sort_values(list(frame.columns[:2]), kind="stable", ignore_index=True)
    return report


def _tol(setup: RunSetup, default: float) -> float:
    return setup.config.tolerance if setup.config.tolerance is not None else default


def _payload_columns(setup: RunSetup, prefix: str, u: FiberElement) -> dict:
    fiber = setup.bundle.fiber
    if setup.bundle.fiber_kind == "finite":
        return {f"{prefix}0": int(u.payload)}
    return {f"{prefix}{i}": float(v) for i, v in enumerate(fiber.coords(u.payload))}


# ───────────────────────────────────────────────
# transport
# ───────────────────────────────────────────────

def cmd_transport(setup: RunSetup) -> RunReport:
    """Apply the transport to configured or sampled elements."""
    T = setup.transport
    cfg = setup.config
    tasks = setup.tasks
    if not tasks:
        tasks = tuple(TransportTask(p, p.domain.lo, p.domain.hi) for p in setup.paths)

    def job(k, task):
        def run():
            m = T.at(task.path, task.s, task.t)
            if task.element is not None:
                elements = [task.element]
            else:
                rng = np.random.default_rng([cfg.seed, k])
                elements = m.source.samples(rng, config.FIBER_SAMPLES)
            tol = _tol(setup, T.tolerance)
            inverse = LawAccumulator("inverse", tol)
            expected = LawAccumulator("expected-value", tol)
            rows = []
            for j, u in enumerate(elements):
                v = m.apply(u)
                inverse.add(setup.bundle.distance(m.inverse.apply(v), u), element=j)
                if task.expected is not None:
                    if "payload" in task.expected:
                        want = m.target.element(task.expected["payload"])
                    else:
                        want = m.target.element(float(task.expected["scale"]) * np.asarray(u.payload))
                    expected.add(setup.bundle.distance(v, want), element=j)
                rows.append({"task": k, "element": j, "path": task.path.name, "s": task.s, "t": task.t,
                             **_payload_columns(setup, "in", u), **_payload_columns(setup, "out", v)})
            reports = (inverse.report(),) + ((expected.report(),) if task.expected is not None else ())
            return Outcome(SuiteReport(f"transport:{task.path.name}", reports),
                           {"elements": pd.DataFrame(rows)})
        return run

    report = RunReport("transport", cfg.echo())
    jobs = [(f"transport:{k:03d}:{task.path.name}", job(k, task)) for k, task in enumerate(tasks)]
    return run_jobs(report, jobs)


# ───────────────────────────────────────────────
# check
# ───────────────────────────────────────────────

def _check_job(setup: RunSetup, suite: str, gamma: PathSpec) -> Callable[[], Outcome]:
    T = setup.transport
    tol = setup.config.tolerance
    plan = setup.plan((gamma,))

    def run():
        if suite == "transport":
            result = transport_suite(T, plan, tol)
        elif suite == "parallel":
            result = is_parallel_transport_along_paths(T, plan, tol)
        elif suite == "axioms":
            result = check_axioms(to_parallel(T), plan, tol=tol)
        elif suite == "round-trip":
            result = SuiteReport(f"round-trip:{T}", (round_trip_T(T, plan, tol), round_trip_psi(to_parallel(T), plan, tol)))
        elif suite == "case-split":
            P = to_transport(to_parallel(T))
            result = check_case_split(P, gamma, plan.grid(gamma.domain), plan.seed, tol)
        elif suite == "continuity":
            result = continuity_smoke(to_parallel(T), gamma, seed=plan.seed)
        else:
            raise KeyError(suite)
        return Outcome(result)

    return run


def cmd_check(setup: RunSetup) -> RunReport:
    """Run the selected law and axiom suites on every path."""
    cfg = setup.config
    jobs: list[Job] = []
    for suite in cfg.suites:
        if suite == "path-independence":
            for g1, g2 in setup.pairs:
                jobs.append((f"path-independence:{g1.name}|{g2.name}",
                             lambda g1=g1, g2=g2: Outcome(check_path_independence(
                                 setup.transport, g1, g2, cfg.seed, cfg.tolerance))))
            continue
        for gamma in setup.paths:
            jobs.append((f"{suite}:{gamma.name}", _check_job(setup, suite, gamma)))
    logger.info(f"Running {len(jobs)} checks for {setup.transport}")
    return run_jobs(RunReport("check", cfg.echo()), jobs)


# ───────────────────────────────────────────────
# factorize
# ───────────────────────────────────────────────

def _finite_path(setup: RunSetup) -> PathSpec:
    return setup.paths[0]


def cmd_factorize(setup: RunSetup) -> RunReport:
    """Factorization round trips, anchor sweeps and finite-fibre oracles."""
    cfg = setup.config
    block = cfg.factorize
    jobs: list[Job] = []

    if setup.transport is not None:
        T = setup.transport
        anchors = block.get("anchors", [0.0, 0.5, 1.0])

        def path_job(gamma):
            def run():
                grid = setup.plan((gamma,)).grid(gamma.domain)
                params = [unit_domain_fraction(gamma, a) for a in anchors]
                fac = factorize(T, gamma, params[0])
                sweep = anchor_sweep(T, gamma, params, grid, cfg.tolerance)
                result = SuiteReport(f"factorize:{gamma.name}",
                                     (reconstruct_residual(fac, T, grid, cfg.tolerance),) + sweep.reports)
                tables = {}
                if T.bundle.fiber_kind == "finite":
                    frame = permutation_tables(fac, grid)
                    frame.insert(0, "path", gamma.name)
                    tables["path_tables"] = frame
                return Outcome(result, tables)
            return run

        jobs.extend((f"factorize:{gamma.name}", path_job(gamma)) for gamma in setup.paths)

    finite = block.get("finite")
    if finite:
        gamma = _finite_path(setup)

        def finite_job(size, n, i):
            def run():
                bundle = finite_bundle(gamma.dim, size)
                grid = uniform_grid(gamma.domain, n)
                result = finite_round_trip(bundle, gamma, grid, np.random.default_rng([cfg.seed, size, n, i]))
                # same seed, same first draw: the family the round trip started from
                fac = random_bijection_family(bundle, gamma, grid, np.random.default_rng([cfg.seed, size, n, i]))
                frame = permutation_tables(fac, grid)
                frame.insert(0, "instance", f"q{size}:n{n}:{i:03d}")
                return Outcome(result, {"finite_tables": frame})
            return run

        for size in finite.get("sizes", [2, 3, 4, 5]):
            for n in finite.get("grid_sizes", [3, 5, 7]):
                for i in range(int(finite.get("instances", 9))):
                    jobs.append((f"finite:q{size}:n{n}:{i:03d}", finite_job(size, n, i)))

    gauge = block.get("gauge")
    if gauge:
        gamma = _finite_path(setup)
        size, n = int(gauge.get("size", 4)), int(gauge.get("grid_size", 5))

        def gauge_job(i):
            def run():
                grid = uniform_grid(gamma.domain, n)
                rng = np.random.default_rng([cfg.seed, 1_000_003, i])
                return Outcome(gauge_recovery(finite_bundle(gamma.dim, size), gamma, grid, rng))
            return run

        jobs.extend((f"gauge:{i:03d}", gauge_job(i)) for i in range(int(gauge.get("pairs", 50))))

    logger.info(f"Running {len(jobs)} factorization checks")
    return run_jobs(RunReport("factorize", cfg.echo()), jobs)


# ───────────────────────────────────────────────
# holonomy
# ───────────────────────────────────────────────

def cmd_holonomy(setup: RunSetup) -> RunReport:
    """Holonomy of connection loops against a closed form."""
    cfg = setup.config
    c = setup.connection
    block = cfg.holonomy
    E = setup.expected

    def job(loop):
        def run():
            P = holonomy(c, loop, cfg.step).matrix
            F = np.eye(P.shape[0])
            if block.get("frame") == "sphere":
                # coordinate components -> orthonormal frame at the loop's colatitude
                F = sphere_frame(float(loop.start[0]))
            M = F @ P @ np.linalg.inv(F)
            reports: list[LawReport] = []
            tables = {"matrices": pd.DataFrame(
                [{"loop": loop.name, "row": i, "col": j, "value": float(M[i, j])}
                 for i in range(M.shape[0]) for j in range(M.shape[1])])}
            if E is not None:
                acc = LawAccumulator("expected-value", _tol(setup, config.ODE_TOLERANCE))
                acc.add(float(np.linalg.norm(M - E)), loop=loop.name)
                reports.append(acc.report())
                steps = block.get("steps")
                if steps:
                    frame = convergence_study(c, loop, np.linalg.inv(F) @ E @ F, steps)
                    frame.insert(0, "loop", loop.name)
                    tables["convergence"] = frame
                    if "min_ratio" in block:
                        order = LawAccumulator("convergence-order", 1.0)
                        for step, ratio in zip(frame["step"], frame["ratio"]):
                            if np.isfinite(ratio):
                                order.add(float(block["min_ratio"]) / ratio, loop=loop.name, step=float(step))
                        reports.append(order.report())
            if c.kind == "christoffel":
                p = c.bundle.fiber_at(loop.start).samples(np.random.default_rng(cfg.seed), 1)[0]
                reports.append(norm_drift(c, loop, loop.domain.lo, p, tol=_tol(setup, config.ODE_TOLERANCE)))
            return Outcome(SuiteReport(f"holonomy:{loop.name}", tuple(reports)), tables,
                           {"matrix": M.tolist()})
        return run

    jobs = [(f"holonomy:{loop.name}", job(loop)) for loop in setup.paths]
    return run_jobs(RunReport("holonomy", cfg.echo()), jobs)


# ───────────────────────────────────────────────
# reconstruct-horizontal
# ───────────────────────────────────────────────

def _probes(x: np.ndarray, rng: np.random.Generator, accel: float) -> list[Probe]:
    """A line, a curved path with the same start and velocity, and a second line."""
    v, w = rng.normal(size=(2, x.shape[0]))
    v, w = v / np.linalg.norm(v), w / np.linalg.norm(w)
    half = 0.1
    curved = analytic_path("quadratic", Interval(-half, half), name="probe-curved",
                           start=x, velocity=v, accel=accel * np.roll(v, 1))
    return [line_probe(x, v), Probe(curved, 0.0), line_probe(x, w)]


def cmd_reconstruct_horizontal(setup: RunSetup) -> RunReport:
    """Horizontal spaces recovered from a transport, and the lift conditions."""
    cfg = setup.config
    T, c, bundle = setup.transport, setup.connection, setup.bundle
    block = cfg.horizontal
    min_margin = float(block.get("min_margin", 0.1))
    a1, a2 = (float(a) for a in block.get("coeffs", [1.0, 1.0]))
    samples = int(block.get("lift_samples", 1001))
    accel = float(block.get("accel", 0.5))

    def job(k, p):
        def run():
            rng = np.random.default_rng([cfg.seed, k])
            x = np.asarray(p.base, dtype=float)
            row = {"point": k, **{f"x{i}": float(v) for i, v in enumerate(x)}}
            try:
                est = horizontal_space_from_transport(T, p, rng=rng)
                complementarity = check_complementarity(est, bundle, min_margin)
                row["margin"] = complementarity.margin
                row["singular_values"] = " ".join(f"{s:.6g}" for s in est.singular_values)
                if c is not None:
                    angles = principal_angles(est.spanning, analytic_horizontal_space(c, p).spanning)
                    row["max_angle"] = float(angles.max())
            except DegenerateEstimateError as e:
                acc = LawAccumulator("complementarity", 1.0 - min_margin)
                acc.add(1.0, point=k, error=str(e))
                complementarity = acc.report(margin=0.0, note="degenerate probe tangents")
            probes = _probes(x, rng, accel)
            reports = [
                complementarity,
                check_initial_uniqueness(T, p, probes[0], probes[1]),
                check_linearization(T, p, probes[0], probes[2], a1, a2),
                check_c1_smoothness(lift_via_transport(T, probes[0].path, probes[0].anchor, p, samples)),
            ]
            if c is not None:
                reports.append(check_horizontal_agreement(T, c, [p], seed=cfg.seed + k))
            return Outcome(SuiteReport(f"horizontal:{k}", tuple(reports)), {"spaces": pd.DataFrame([row])})
        return run

    def bridge_job(k, p):
        def run():
            probes = _probes(np.asarray(p.base, dtype=float), np.random.default_rng([cfg.seed, k]), accel)
            return Outcome(parallel_lift_conditions(to_parallel(T), p, probes, (a1, a2), lift_samples=samples))
        return run

    jobs: list[Job] = []
    for k, p in enumerate(setup.points):
        jobs.append((f"horizontal:{k:03d}", job(k, p)))
        jobs.append((f"parallel-lift:{k:03d}", bridge_job(k, p)))
    return run_jobs(RunReport("reconstruct-horizontal", cfg.echo()), jobs)


HANDLERS: dict[str, Callable[[RunSetup], RunReport]] = {
    "transport": cmd_transport,
    "check": cmd_check,
    "factorize": cmd_factorize,
    "holonomy": cmd_holonomy,
    "reconstruct-horizontal": cmd_reconstruct_horizontal,
}


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", required=True, help="JSON run config (see docs/config_schema.md)")
    common.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
    common.add_argument("--step", type=float, help="RK4 step for connection backends (overrides the config)")
    common.add_argument("--tol", type=float, help="Tolerance for every check (overrides backend defaults)")
    common.add_argument("--out", "-o", help=f"Output directory (default: config 'out', else {config.OUT_DIR})")
    common.add_argument("-v", "--verbose", action="store_true", help="Enable DEBUG logging")

    parser = argparse.ArgumentParser(
        description="Transports along paths on fibre bundles: law checks, factorization, holonomy"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        sub.add_parser(command, parents=[common], help=(HANDLERS[command].__doc__ or command).strip())
    return parser.parse_args(argv)


def main(args: argparse.Namespace) -> int:
    overrides = {"seed": args.seed, "step": args.step, "tolerance": args.tol, "out": args.out}
    try:
        cfg = load_config(args.config, overrides)
        setup = resolve(cfg, args.command)
    except ConfigError as e:
        logger.error(f"Config error: {e}")
        return 2

    t0 = time.perf_counter()
    report = HANDLERS[args.command](setup)
    report.write(cfg.out)
    failed = [c for c in report.check_ids if c in report.errors or not report.results[c].passed]
    if failed:
        logger.warning(f"{len(failed)} of {len(report.check_ids)} checks failed: {failed[:10]}")
    logger.info(f"{args.command} finished in {time.perf_counter() - t0:.1f}s")
    return 0 if report.passed else 1


if __name__ == "__main__":
    args = parse_args()
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s")
    try:
        sys.exit(main(args))
    except KeyboardInterrupt:
        logger.info("\nAborted by user.")
        sys.exit(1)
