"""Scenario dispatch: instance generation, solver runs per seed, traces, summaries and tables."""

import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from enum import StrEnum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Type, TypeVar

import numpy as np

import fractrans.modules.file_io as fio
from fractrans.core.errors import ArtifactError, ConfigError
from fractrans.modules import (
    aoi,
    beamforming,
    efficiency,
    ncut,
    network,
    pilot,
    power,
    scheduling,
    secrecy,
    svm,
)
from fractrans.modules.csvtrace import emit_trace_csv, format_value, write_rows
from fractrans.modules.matrix import MatrixVariant
from fractrans.modules.problem import SolverConfig, SolverTrace, TraceStatus
from fractrans.modules.scalar import TransformKind

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["seed", "method", "case", "value", "iterations", "status", "monotone", "solution"]


@dataclass
class MethodResult:
    """Outcome of one method on one seed."""

    seed: int
    method: str
    value: float
    case: str = ""
    solution: str = ""
    trace: Optional[SolverTrace] = None

    def summary_row(self) -> Dict[str, str]:
        """Row of the summary CSV, free of timing data."""
        trace = self.trace
        monotone = ""
        if trace is not None and trace.monotone_required:
            monotone = str(trace.is_monotone())
        return {
            "seed": str(self.seed),
            "method": self.method,
            "case": self.case,
            "value": format_value(self.value),
            "iterations": str(trace.iterations) if trace is not None else "",
            "status": str(trace.status) if trace is not None else "",
            "monotone": monotone,
            "solution": self.solution,
        }

    @property
    def label(self) -> str:
        """Method and case joined for file names and tables."""
        return f"{self.method}-{self.case}" if self.case else self.method


SeedRun = Tuple[Optional[network.NetworkInstance | network.GraphInstance], List[MethodResult]]


def _vector(x: Any) -> str:
    return " ".join(f"{v:.10g}" for v in np.real(np.ravel(x)))


def _result(seed: int, method: str, value: float, trace: Optional[SolverTrace] = None, **kwargs: Any) -> MethodResult:
    if trace is not None:
        trace.aux = None
    return MethodResult(seed, method, float(value), trace=trace, **kwargs)


E = TypeVar("E", bound=StrEnum)


def _variant(enum: Type[E], value: Optional[str], default: E) -> E:
    if value is None:
        return default
    try:
        return enum(value)
    except ValueError as e:
        raise ConfigError(f"Unknown variant '{value}', expected one of: {', '.join(v.value for v in enum)}") from e


def _run_ee(cfg: Dict[str, Any], seed: int, solver: SolverConfig) -> SeedRun:
    sec = cfg["EE"]
    params = (sec["GAIN"], sec["NOISE"], sec["CIRCUIT_POWER"], sec["MAX_POWER"])
    dink = efficiency.solve_energy_efficiency(*params, config=solver)
    qt = efficiency.solve_energy_efficiency_qt(*params, config=solver)
    p_gs, ee_gs = efficiency.golden_section_efficiency(*params)
    out = [
        _result(seed, "dinkelbach", dink.value, dink.trace, solution=_vector(dink.x)),
        _result(seed, "qt", qt.value, qt.trace, solution=_vector(qt.x)),
        _result(seed, "golden-section", ee_gs, solution=_vector([p_gs])),
    ]
    if cfg["RUN"]["ORACLE"]:
        p_lift, ee_lift = efficiency.lifted_efficiency(*params)
        out.append(_result(seed, "lifted-oracle", ee_lift, solution=_vector([p_lift])))
    return None, out


def _run_svm(cfg: Dict[str, Any], seed: int, solver: SolverConfig) -> SeedRun:
    X, t = svm.separable_points(cfg["SVM"]["POINTS"], cfg["SVM"]["GAP"], seed)
    sol = svm.solve_svm_margin(X, t, solver)
    out = [_result(seed, "dinkelbach", sol.margin, sol.trace, solution=_vector(np.append(sol.w, sol.b)))]
    if cfg["RUN"]["ORACLE"]:
        grid = svm.margin_oracle(X, t)
        out.append(_result(seed, "grid-oracle", grid.best_value, solution=_vector(grid.best_x)))
    return None, out


def _run_aoi(cfg: Dict[str, Any], seed: int, solver: SolverConfig) -> SeedRun:
    sec = cfg["AOI"]
    mu = sec["SERVICE_RATE"]
    transform = _variant(TransformKind, cfg["RUN"]["VARIANT"] or sec["TRANSFORM"], TransformKind.INVERSE_QT)
    out = []
    for K in sec["SOURCES"]:
        case = f"K{K}"
        fp = aoi.solve_aoi(K, mu, solver, transform)
        lam_eq, equal = aoi.equal_rate_baseline(K, mu)
        lam_max, full = aoi.max_rate_baseline(K, mu)
        out += [
            _result(seed, str(transform), fp.value, fp.trace, case=case, solution=_vector(fp.x)),
            _result(seed, "equal-rate", equal, case=case, solution=_vector(lam_eq)),
            _result(seed, "max-rate", full, case=case, solution=_vector(lam_max)),
        ]
    return None, out


def _run_secrecy(cfg: Dict[str, Any], seed: int, solver: SolverConfig) -> SeedRun:
    sec = cfg["SECRECY"]
    net = network.secrecy_network(
        sec["LEGIT_GAINS"], sec["EAVES_GAINS"], sec["NOISE_DBM"], sec["EAVES_NOISE_DBM"], sec["MAX_POWER_DBM"]
    )
    fp = secrecy.solve_secrecy(net, solver)
    out = [
        _result(seed, "unified-qt", fp.value, fp.trace, solution=_vector(fp.x)),
        _result(seed, "unified-qt", float(np.sum(secrecy.displayed_rates(net, fp.x))), case="clamped"),
    ]
    if cfg["RUN"]["ORACLE"]:
        resolution = sec["GRID_RESOLUTION"]
        grid = secrecy.secrecy_oracle(net, resolution, zoom=100 * resolution)
        out.append(_result(seed, "grid-oracle", grid.best_value, solution=_vector(grid.best_x)))
    return net, out


def _run_power(cfg: Dict[str, Any], seed: int, solver: SolverConfig) -> SeedRun:
    sec = cfg["POWER"]
    net = network.generate_network(network.Topology.from_benchcfg(sec), seed, sec["MAX_POWER_DBM"], sec["NOISE_DBM"])
    fp = power.solve_power_control(net, solver)
    fixed = power.fixed_point_solve(net, solver)
    full = power.full_power(net)
    rand = power.random_power(net, seed)
    return net, [
        _result(seed, "fp", fp.value, fp.trace, solution=_vector(fp.x)),
        _result(seed, "fp", power.fixed_point_residual(net, fp.x), case="fixed-point-residual"),
        _result(seed, "fixed-point", fixed.value, fixed.trace, solution=_vector(fixed.x)),
        _result(seed, "full-power", power.sum_rate(net, full), solution=_vector(full)),
        _result(seed, "random-power", power.sum_rate(net, rand), solution=_vector(rand)),
    ]


def _run_ncut(cfg: Dict[str, Any], seed: int, solver: SolverConfig) -> SeedRun:
    sec = cfg["NCUT"]
    graph = network.planted_graph(sec["NODES"], sec["CLUSTERS"], sec["INTRA"], sec["INTER"], sec["JITTER"], seed)
    init = ncut.random_assignment(graph.nodes, graph.clusters, seed)
    fpc = ncut.solve_ncut_fpc(graph, init, solver)
    out = [
        _result(seed, "fpc", fpc.value, fpc.trace, solution=_vector(fpc.x)),
        _result(seed, "planted", ncut.ncut_value(graph, graph.planted), solution=_vector(graph.planted)),
    ]
    if cfg["RUN"]["ORACLE"]:
        best = ncut.ncut_oracle(graph)
        hit = ncut.same_partition(fpc.x, best.best_x)
        out.append(_result(seed, "enumeration", best.best_value, solution=_vector(best.best_x)))
        out.append(_result(seed, "fpc", float(hit), case="reached-optimum"))
    return graph, out


def _pilot_network(cfg: Dict[str, Any], seed: int) -> network.NetworkInstance:
    sec = cfg["PILOT"]
    topology = network.Topology.from_benchcfg(sec, users_per_cell=sec["USERS"])
    return network.generate_pilot_network(
        topology, seed, sec["PILOT_LENGTH"], sec["PILOT_POWER_DBM"], sec["NOISE_DBM"], sec["ANTENNAS"]
    )


def _run_pilot(cfg: Dict[str, Any], seed: int, solver: SolverConfig) -> SeedRun:
    net = _pilot_network(cfg, seed)
    variant = _variant(MatrixVariant, cfg["RUN"]["VARIANT"], MatrixVariant.BASIC)
    fpp = pilot.solve_pilot_fpp(net, solver, variant)
    out = [
        _result(seed, f"fpp-{variant}", fpp.value, fpp.trace, case="objective"),
        _result(seed, f"fpp-{variant}", pilot.estimation_mse(net, fpp.x), case="mse"),
    ]
    for name, S in (("orthogonal", pilot.orthogonal_pilots(net, seed)), ("random", pilot.random_pilots(net, seed))):
        out.append(_result(seed, name, pilot.pilot_objective(net, S), case="objective"))
        out.append(_result(seed, name, pilot.estimation_mse(net, S), case="mse"))
    return net, out


def _run_beamform(cfg: Dict[str, Any], seed: int, solver: SolverConfig) -> SeedRun:
    sec = cfg["BEAMFORM"]
    net = network.generate_mimo_network(
        sec["CELLS"],
        sec["USERS"],
        sec["TX_ANTENNAS"],
        sec["RX_ANTENNAS"],
        sec["STREAMS"],
        sec["MAX_POWER"],
        sec["NOISE"],
        seed,
    )
    chosen = cfg["RUN"]["VARIANT"]
    variants = [_variant(beamforming.BeamformingVariant, chosen, beamforming.BeamformingVariant.WMMSE)]
    if chosen is None:
        variants = list(beamforming.BeamformingVariant)
    out = []
    for variant in variants:
        sol = beamforming.solve_beamforming(net, variant, solver)
        out.append(_result(seed, str(variant), sol.value, sol.trace))
        out.append(_result(seed, str(variant), beamforming.stationarity_residual(net, sol.x), case="residual"))
    return net, out


def _run_schedule(cfg: Dict[str, Any], seed: int, solver: SolverConfig) -> SeedRun:
    sec = cfg["SCHEDULE"]
    topology = network.Topology.from_benchcfg(sec, users_per_cell=sec["CANDIDATES"])
    net = network.generate_uplink_network(topology, seed, sec["MAX_POWER_DBM"], sec["NOISE_DBM"])
    fp = scheduling.schedule_uplink_fplinq(net, solver)
    out = [_result(seed, "fplinq", fp.value, fp.trace, solution=_vector(fp.schedule))]
    if cfg["RUN"]["ORACLE"]:
        schedule, _, best = scheduling.best_fixed_schedule(net, solver)
        out.append(_result(seed, "exhaustive", best, solution=_vector(schedule)))
        out.append(_result(seed, "fplinq", float(fp.value >= best - 1e-6), case="matches-exhaustive"))
    return net, out


def _run_rates(cfg: Dict[str, Any], seed: int, solver: SolverConfig) -> SeedRun:
    sec = cfg["RATES"]
    net = _pilot_network(cfg, seed)
    rates = pilot.convergence_rates(net, sec["ITERATIONS"], sec["K_LO"], sec["K_HI"], seed)
    out = []
    for name, (trace, slope) in rates.items():
        out.append(_result(seed, name, trace.final_objective, trace))
        out.append(_result(seed, name, slope, case="slope"))
    return net, out


SCENARIO_RUNNERS: Dict[str, Callable[[Dict[str, Any], int, SolverConfig], SeedRun]] = {
    "ee": _run_ee,
    "svm": _run_svm,
    "aoi": _run_aoi,
    "secrecy": _run_secrecy,
    "power": _run_power,
    "ncut": _run_ncut,
    "pilot": _run_pilot,
    "beamform": _run_beamform,
    "schedule": _run_schedule,
    "rates": _run_rates,
}


def run_seed(scenario: str, cfg: Dict[str, Any], seed: int) -> SeedRun:
    """Run every method of a scenario on the instance drawn from `seed`."""
    if scenario not in SCENARIO_RUNNERS:
        raise ConfigError(f"Unknown scenario '{scenario}'")
    solver = SolverConfig.from_benchcfg(cfg["SOLVER"], seed=seed, variant=cfg["RUN"]["VARIANT"])
    logger.info("Scenario %s, seed %d", scenario, seed)
    return SCENARIO_RUNNERS[scenario](cfg, seed, solver)


def collect_results(scenario: str, cfg: Dict[str, Any]) -> Dict[int, SeedRun]:
    """Fan seeds out to the worker pool; the mapping is ordered by seed."""
    seeds = sorted(set(cfg["RUN"]["SEEDS"]))
    workers = min(cfg["RUN"]["WORKERS"], len(seeds))
    runs: Dict[int, SeedRun] = {}
    if workers <= 1:
        for seed in seeds:
            runs[seed] = run_seed(scenario, cfg, seed)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(run_seed, scenario, cfg, seed): seed for seed in seeds}
            for fut in as_completed(futures):
                runs[futures[fut]] = fut.result()
    return {seed: runs[seed] for seed in seeds}


def format_table(scenario: str, results: Sequence[MethodResult]) -> str:
    """Mean, min and max of every method/case over the seeds, as aligned plain text."""
    groups: Dict[str, List[float]] = {}
    for r in results:
        groups.setdefault(r.label, []).append(r.value)
    header = ["method", "seeds", "mean", "min", "max"]
    rows = [header] + [
        [label, str(len(v)), f"{np.mean(v):.6g}", f"{np.min(v):.6g}", f"{np.max(v):.6g}"]
        for label, v in groups.items()
    ]
    widths = [max(len(row[c]) for row in rows) for c in range(len(header))]
    lines = [f"scenario: {scenario}"]
    for row in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def write_artifacts(scenario: str, runs: Dict[int, SeedRun], out_dir: str) -> List[MethodResult]:
    """Write every instance and trace, the summary CSV and the plain-text table.

    Returns
    -------
        the results of all seeds in seed order

    """
    fio.prepare_output_dir(out_dir)
    results: List[MethodResult] = []
    for seed, (instance, seed_results) in runs.items():
        if instance is not None:
            network.save_instance(instance, fio.instance_path(out_dir, scenario, seed))
        for r in seed_results:
            if r.trace is not None:
                emit_trace_csv(r.trace, fio.trace_path(out_dir, scenario, r.label, r.seed))
        results.extend(seed_results)
    write_rows(fio.summary_path(out_dir, scenario), [r.summary_row() for r in results], SUMMARY_COLUMNS)
    table = format_table(scenario, results)
    try:
        with open(fio.table_path(out_dir, scenario), "w", encoding="utf-8") as f:
            f.write(table)
    except OSError as e:
        raise ArtifactError(f"Cannot write table: {e}") from e
    logger.info("Results of %s:\n%s", scenario, table)
    return results


def run_scenario(scenario: str, cfg: Dict[str, Any], out_dir: str) -> int:
    """Run a scenario and write its artifacts.

    Returns
    -------
        0 on success, 3 when any solver trace ended degenerate

    """
    results = write_artifacts(scenario, collect_results(scenario, cfg), out_dir)
    degenerate = [r for r in results if r.trace is not None and r.trace.status == TraceStatus.DEGENERATE]
    for r in degenerate:
        logger.error("Method %s on seed %d hit a degenerate denominator", r.label, r.seed)
    return 3 if degenerate else 0
