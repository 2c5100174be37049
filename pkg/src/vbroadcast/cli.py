"""Command-line front end: ``vbroadcast <command> [flags]``.

Exit codes: 0 success, 1 a verification or certificate check failed,
2 the SDP solver did not converge, 64 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import costs, protocols, sampling
from ._config import SizeCapError
from .linalg import SystemLayout, max_entangled, random_density_matrix
from .sdp import broadcast
from .sdp.problem import to_json_dict
from .sdp.solver import SolverOptions

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_NOT_CONVERGED = 2
EXIT_USAGE = 64

COMMANDS = ("cost", "bounds", "certify", "verify", "sweep", "simulate", "dump-sdp")
OUTPUTS = ("human", "json", "csv")


class UsageError(Exception):
    pass


@dataclass
class CliConfig:
    """Every flag of every command; fields a command does not use stay ``None``."""

    command: str
    d: int | None = None
    n: int | None = None
    method: str | None = None
    protocol: str | None = None
    kind: str | None = None
    n_range: str | None = None
    sdp_up_to: int | None = None
    j: int | None = None
    state: str | None = None
    obs: str | None = None
    delta: float | None = None
    epsilon: float | None = None
    rounds: int | None = None
    seed: int | None = None
    workers: int | None = None
    tol: float | None = None
    feas_tol: float | None = None
    gap_tol: float | None = None
    max_iter: int | None = None
    trace_path: str | None = None
    output: str = "human"
    output_path: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "CliConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise KeyError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)

    def to_argv(self) -> list[str]:
        """Arguments that parse back to this config."""
        argv = [self.command]
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "command" or value is None:
                continue
            flag = "--" + f.name.replace("_", "-")
            argv += [flag, repr(value) if isinstance(value, float) else str(value)]
        return argv

    def solver_options(self) -> SolverOptions:
        base = SolverOptions()
        return SolverOptions(
            feas_tol=base.feas_tol if self.feas_tol is None else self.feas_tol,
            gap_tol=base.gap_tol if self.gap_tol is None else self.gap_tol,
            max_iter=base.max_iter if self.max_iter is None else self.max_iter,
        )


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--output", choices=OUTPUTS, default="human")
    common.add_argument("--output-path")
    common.add_argument("--dry-run", action="store_true", help="print the parsed configuration and exit")

    dn = _Parser(add_help=False)
    dn.add_argument("--d", type=int, required=True, help="local dimension of B")
    dn.add_argument("--n", type=int, required=True, help="number of outputs")

    solver = _Parser(add_help=False)
    solver.add_argument("--feas-tol", type=_positive_float, help=f"default {SolverOptions.feas_tol}")
    solver.add_argument("--gap-tol", type=_positive_float, help=f"default {SolverOptions.gap_tol}")
    solver.add_argument("--max-iter", type=_positive_int, help=f"default {SolverOptions.max_iter}")

    parser = _Parser(prog="vbroadcast", description="Virtual broadcasting costs, certificates and sampling.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("cost", parents=[common, dn, solver], help="optimal simulation cost")
    p.add_argument("--method", choices=("analytic", "sdp", "both"), default="both")

    sub.add_parser("bounds", parents=[common, dn], help="closed-form lower and upper cost bounds")

    p = sub.add_parser("certify", parents=[common, dn], help="check primal/dual certificate points")
    p.add_argument("--tol", type=_positive_float, help="feasibility tolerance, default 1e-9")

    p = sub.add_parser("verify", parents=[common, dn], help="check a protocol's Choi operator")
    p.add_argument("--protocol", choices=("warmup", "universal", "optimal2"), required=True)
    p.add_argument("--tol", type=_positive_float, help="marginal tolerance, default 1e-10")

    p = sub.add_parser("sweep", parents=[common, solver], help="bounds and SDP values over a range of n")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n-range", "--n", dest="n_range", required=True, help="inclusive range LO:HI")
    p.add_argument("--sdp-up-to", type=int, help="solve the SDP only for n up to this value")
    p.add_argument("--workers", type=_positive_int)

    p = sub.add_parser("simulate", parents=[common, dn], help="Monte Carlo estimate of tr[O rho]")
    p.add_argument("--j", type=int, required=True, help="output index measured together with A")
    p.add_argument("--state", default="bell", help="'bell' or 'random:SEED'")
    p.add_argument("--obs", required=True, help="Pauli word such as ZZ, or a JSON matrix file")
    p.add_argument("--delta", type=_positive_float, default=0.05)
    p.add_argument("--epsilon", type=_positive_float, default=0.05)
    p.add_argument("--rounds", type=_positive_int, help="override the Hoeffding round count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive_int)
    p.add_argument("--trace-path", help="write the per-round CSV log here")

    p = sub.add_parser("dump-sdp", parents=[common, dn], help="write the SDP as a JSON document")
    p.add_argument("--kind", choices=("primal", "dual"), default="primal")
    return parser


def parse_config(argv: list[str]) -> tuple[CliConfig, bool]:
    ns = vars(build_parser().parse_args(argv))
    dry_run = ns.pop("dry_run")
    return CliConfig.from_dict(ns), dry_run


# reports


def _fmt_gamma(label: str, g: float | None) -> str:
    if g is None:
        return f"{label}: n/a"
    return f"{label}: gamma (linear) = {g:.10g}, log2 gamma = {math.log2(g):.10g}"


def _cost(cfg: CliConfig) -> tuple[dict, list[str], int]:
    if cfg.method in ("analytic", "both") and cfg.n != 2:
        raise UsageError("the analytic cost is only available for n = 2; use --method sdp")
    result: dict = {}
    lines = []
    if cfg.method in ("analytic", "both"):
        result["analytic"] = costs.gamma2_analytic(cfg.d).to_dict()
        lines.append(_fmt_gamma("analytic", result["analytic"]["gamma_linear"]))
    if cfg.method in ("sdp", "both"):
        report = costs.optimal_cost_sdp(cfg.d, cfg.n, cfg.solver_options())
        result["sdp"] = report.to_dict()
        lines.append(_fmt_gamma("sdp", report.gamma_linear))
        lines.append(f"solver: {report.solver['status']} after {report.solver['iterations']} iterations")
    if "analytic" in result and "sdp" in result:
        result["delta"] = result["sdp"]["gamma_linear"] - result["analytic"]["gamma_linear"]
        lines.append(f"sdp - analytic = {result['delta']:.3e}")
    lower, upper = costs.bounds_n(cfg.d, cfg.n)
    lines.append(f"bounds (linear): [{lower:.10g}, {upper:.10g}]")
    return result, lines, EXIT_OK


def _bounds(cfg: CliConfig):
    lower, upper = costs.bounds_n(cfg.d, cfg.n)
    result = {
        "lower_linear": lower,
        "upper_linear": upper,
        "lower_log2": math.log2(lower),
        "upper_log2": math.log2(upper),
    }
    return result, [_fmt_gamma("lower bound", lower), _fmt_gamma("upper bound", upper)], EXIT_OK


def _certify(cfg: CliConfig):
    tol = 1e-9 if cfg.tol is None else cfg.tol
    if cfg.n == 2:
        report = costs.certificate_2broadcast(cfg.d, tol)
        lines = [
            f"primal point feasible: {report.primal_pass} (objective {report.primal_obj:.12g})",
            f"dual point feasible:   {report.dual_pass} (objective {report.dual_obj:.12g})",
            f"gap: {report.gap:.3e}",
        ]
    else:
        report = costs.certificate_nbroadcast_bounds(cfg.d, cfg.n, tol)
        lines = [
            f"upper bound from signed decomposition: {report.upper_from_gamma_prime:.12g} "
            f"(components CPTP: {report.m1_cptp and report.m2_cptp})",
            f"lower bound from dual point: {report.lower_obj:.12g} (feasible: {report.dual_lower_pass})",
        ]
    result = report.to_dict()
    result["passed"] = report.passed
    lines.append("PASS" if report.passed else "FAIL")
    return result, lines, EXIT_OK if report.passed else EXIT_FAILED


def _verify(cfg: CliConfig):
    tol = 1e-10 if cfg.tol is None else cfg.tol
    if cfg.protocol in ("warmup", "optimal2") and cfg.n != 2:
        raise UsageError(f"protocol {cfg.protocol} is defined for n = 2 only")
    if cfg.d < 1 or cfg.n < 2:
        raise UsageError("need d >= 1 and n >= 2")
    if cfg.protocol == "warmup":
        choi, decomp = protocols.choi_warmup_2broadcast(cfg.d), None
    elif cfg.protocol == "universal":
        choi, decomp = protocols.choi_universal_nbroadcast(cfg.d, cfg.n), protocols.gamma_prime_channels(cfg.d, cfg.n)
    else:
        decomp = protocols.choi_optimal_2broadcast(cfg.d)
        choi = decomp.combined()
    uni = protocols.verify_universal(choi, tol)
    tp = protocols.verify_cptp(choi, 1.0, max(tol, 1e-9))
    result = {
        "universal": uni.passed,
        "max_marginal_deviation": max(uni.deviations),
        "trace_preserving": tp.trace_preserving,
    }
    lines = [
        f"every B-Bj marginal equals Phi: {uni.passed} (max deviation {result['max_marginal_deviation']:.3e})",
        f"trace preserving: {tp.trace_preserving}",
    ]
    passed = uni.passed and tp.trace_preserving
    if decomp is not None:
        c1 = protocols.verify_cptp(decomp.choi1, 1.0, 1e-9)
        c2 = protocols.verify_cptp(decomp.choi2, 1.0, 1e-9)
        result.update(
            p1=decomp.p1, p2=decomp.p2, gamma=decomp.gamma, channel1_cptp=c1.passed, channel2_cptp=c2.passed
        )
        lines.append(f"components CPTP: {c1.passed}, {c2.passed}")
        lines.append(_fmt_gamma("decomposition", decomp.gamma))
        passed = passed and c1.passed and c2.passed
    result["passed"] = passed
    lines.append("PASS" if passed else "FAIL")
    return result, lines, EXIT_OK if passed else EXIT_FAILED


def _parse_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"--n-range must look like LO:HI, got {text!r}") from None
    return lo, hi


def _sweep(cfg: CliConfig):
    lo, hi = _parse_range(cfg.n_range)
    rows = costs.sweep(cfg.d, lo, hi, cfg.sdp_up_to, cfg.solver_options(), cfg.workers or 1)
    records = [r.as_record() for r in rows]
    lines = [f"{'n':>3} {'lower':>12} {'sdp':>12} {'upper':>8}   (linear gamma)"]
    for r in rows:
        sdp = "-" if r.sdp_linear is None else f"{r.sdp_linear:.8f}"
        lines.append(f"{r.n:>3} {r.lower_linear:>12.8f} {sdp:>12} {r.upper_linear:>8.1f}")
    return {"rows": records}, lines, EXIT_OK


def _load_matrix(path: str) -> np.ndarray:
    """JSON array of rows; entries are numbers or ``[re, im]`` pairs."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read observable file {path}: {exc}") from None
    if isinstance(data, dict):
        data = data.get("matrix")
    try:
        return np.array([[complex(*e) if isinstance(e, list) else complex(e) for e in row] for row in data])
    except (TypeError, ValueError):
        raise UsageError(f"observable file {path} must hold a JSON array of rows") from None


def _observable(text: str, d: int) -> sampling.Observable:
    labels = ["A", "Bj"]
    if Path(text).suffix == ".json" or Path(text).is_file():
        m = _load_matrix(text)
        if m.shape != (d * d, d * d):
            raise UsageError(f"observable must be {d * d}x{d * d} for d = {d}, got {m.shape}")
        obs = sampling.Observable(m, SystemLayout([("A", d), ("Bj", d)]))
    else:
        if d != 2:
            raise UsageError("Pauli words need d = 2; pass a JSON matrix file for other d")
        obs = sampling.pauli_observable(text, labels)
    obs.require_bounded()
    return obs


def _state(text: str, d: int) -> np.ndarray:
    if text == "bell":
        return max_entangled(d) / d
    if text.startswith("random:"):
        try:
            seed = int(text.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad state seed in {text!r}") from None
        return random_density_matrix(d * d, np.random.default_rng(seed))
    raise UsageError(f"--state must be 'bell' or 'random:SEED', got {text!r}")


def _simulate(cfg: CliConfig):
    if cfg.d < 2 or cfg.n < 2:
        raise UsageError("need d >= 2 and n >= 2")
    if not 1 <= cfg.j <= cfg.n:
        raise UsageError(f"--j must be in 1..{cfg.n}")
    if cfg.seed < 0:
        raise UsageError("--seed must be nonnegative")
    if cfg.epsilon >= 1:
        raise UsageError("--epsilon must lie in (0, 1)")
    obs = _observable(cfg.obs, cfg.d)
    rho = _state(cfg.state, cfg.d)
    layout = SystemLayout([("A", cfg.d), ("B", cfg.d)])
    if cfg.n == 2:
        decomp = protocols.choi_optimal_2broadcast(cfg.d)
    else:
        decomp = protocols.gamma_prime_channels(cfg.d, cfg.n)
    rounds = cfg.rounds or sampling.hoeffding_rounds(decomp.gamma, cfg.delta, cfg.epsilon)
    res = sampling.run_estimation(
        rho, layout, decomp, obs, cfg.j, rounds, cfg.seed, record=cfg.trace_path is not None, workers=cfg.workers or 1
    )
    if cfg.trace_path is not None:
        Path(cfg.trace_path).write_text(res.trace_csv())
    exact = sampling.exact_expectation(rho, layout, decomp, obs, cfg.j)
    result = res.to_dict(cfg.epsilon)
    result.update(decomposition=decomp.name, p1=decomp.p1, p2=decomp.p2, exact=exact, error=res.estimate - exact)
    lines = [
        f"decomposition {decomp.name}: p1 = {decomp.p1:.10g}, p2 = {decomp.p2:.10g}",
        _fmt_gamma("sampling overhead", decomp.gamma),
        f"rounds M = {rounds}, seed = {cfg.seed}, measured on A{res.target_subsystem}",
        f"estimate = {res.estimate:.6f} (exact {exact:.6f}, error {res.estimate - exact:+.6f})",
        f"Hoeffding interval at confidence {1 - cfg.epsilon:g}: "
        f"[{result['confidence_interval'][0]:.6f}, {result['confidence_interval'][1]:.6f}]",
    ]
    return result, lines, EXIT_OK


def _dump_sdp(cfg: CliConfig):
    build = broadcast.build_primal if cfg.kind == "primal" else broadcast.build_dual
    doc = to_json_dict(build(cfg.d, cfg.n))
    return doc, [json.dumps(doc)], EXIT_OK


HANDLERS = {
    "cost": _cost,
    "bounds": _bounds,
    "certify": _certify,
    "verify": _verify,
    "sweep": _sweep,
    "simulate": _simulate,
    "dump-sdp": _dump_sdp,
}


def _flatten(prefix: str, value, out: dict) -> None:
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else k, v, out)
    elif isinstance(value, list):
        out[prefix] = json.dumps(value)
    else:
        out[prefix] = "" if value is None else value


def _to_csv(command: str, result: dict) -> str:
    buf = io.StringIO()
    if command == "sweep":
        buf.write(costs.rows_to_csv([costs.SweepRow(r["n"], r["lower_linear"], r["sdp_linear"], r["upper_linear"])
                                     for r in result["rows"]]))
        return buf.getvalue()
    flat: dict = {}
    _flatten("", result, flat)
    w = csv.DictWriter(buf, fieldnames=list(flat), lineterminator="\n")
    w.writeheader()
    w.writerow(flat)
    return buf.getvalue()


def render(cfg: CliConfig, result: dict, lines: list[str], exit_code: int) -> str:
    if cfg.command == "dump-sdp":
        return json.dumps(result) + "\n"
    if cfg.output == "json":
        doc = {"command": cfg.command, "config": cfg.to_dict(), "exit_code": exit_code, "result": result}
        return json.dumps(doc, indent=2) + "\n"
    if cfg.output == "csv":
        return _to_csv(cfg.command, result)
    return "\n".join(lines) + "\n"


def load_schema(command: str) -> dict:
    """Published JSON schema for ``--output json`` of ``command`` (``dump-sdp``: the SDP document)."""
    name = "sdp-document.json" if command == "dump-sdp" else f"{command}.json"
    return json.loads(resources.files("vbroadcast.schemas").joinpath(name).read_text())


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg, dry_run = parse_config(argv)
        if dry_run:
            _emit(json.dumps(cfg.to_dict(), indent=2) + "\n", cfg.output_path)
            return EXIT_OK
        result, lines, code = HANDLERS[cfg.command](cfg)
    except UsageError as exc:
        print(f"vbroadcast: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, SizeCapError, sampling.ObservableError) as exc:
        print(f"vbroadcast: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except costs.SdpNotConverged as exc:
        print(f"vbroadcast: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except costs.BoundViolation as exc:
        print(f"vbroadcast: {exc}", file=sys.stderr)
        return EXIT_FAILED
    _emit(render(cfg, result, lines, code), cfg.output_path)
    return code


if __name__ == "__main__":
    sys.exit(main())
