"""
mdlnr - MDL Network Reconstruction
Command-line entry point
"""

import argparse
import logging
import sys
import warnings
from typing import List, Optional

import numpy as np
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler

from config import (
    APP_NAME,
    APP_VERSION,
    DEFAULT_BISECTION_ITERS,
    DEFAULT_DELTA,
    DEFAULT_KAPPA,
    DEFAULT_LAMBDA,
    DEFAULT_MAX_SWEEPS,
    DEFAULT_TOL,
    EXIT_DATA,
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    EXIT_USAGE,
    settings,
)
from data.errors import ConvergenceWarning, ReconstructionError
from data.generator import MEAN_INVERSE_DEGREE, football_stand_in, karate_edges, plant_weights
from data.schema import (
    Alphabet,
    BaselineConfig,
    CandidateMode,
    DecimationStop,
    InitialState,
    McSpec,
    ModelKind,
    OptimizerConfig,
    PriorHyper,
)
from services.baseline_service import cross_validate_l1, decimate, reconstruct_l1
from services.inference_service import reconstruct_mdl
from services.io_service import (
    parse_data_matrix,
    read_edge_list,
    read_network,
    write_data_matrix,
    write_decimation,
    write_json,
    write_network,
    write_perturbations,
    write_report,
)
from services.metrics_service import evaluate
from services.perturbation_service import keystone_scan, perturb_keystone
from services.sampler_service import sample_equilibrium, sample_kinetic

logger = logging.getLogger("mdlnr")

BUILTIN_GRAPHS = {
    "karate": lambda seed: karate_edges(),
    "football": football_stand_in,
}


# ============== LOGGING ==============

def setup_logging(level: str) -> None:
    """Rich log handler on stderr; stdout carries only JSON/TSV output"""
    handler = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=True)
    logging.basicConfig(level=level.upper(), format="%(message)s", datefmt="[%X]", handlers=[handler], force=True)
    logging.captureWarnings(True)


# ============== ARGUMENTS ==============

class UsageParser(argparse.ArgumentParser):
    """argparse with the usage-error exit code of this tool"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _model(token: str) -> ModelKind:
    try:
        return ModelKind.parse(token)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _grid(text: str):
    """lo:hi:n (log-spaced) or a comma list of lambdas"""
    try:
        if ":" in text:
            lo, hi, n = text.split(":")
            return float(lo), float(hi), int(n)
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Invalid lambda grid: {text!r}") from None


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="node-state matrix (TSV, CSV or XLSX), rows = nodes")
    p.add_argument("--model", required=True, type=_model, help="kinetic | equilibrium | kinetic-z | equilibrium-z")
    p.add_argument("--map-zero", action="store_true", help="read {0,1} data, mapping 0 to -1")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=settings.threads)


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = UsageParser(prog="mdlnr", description=APP_NAME)
    parser.add_argument("--version", action="version", version=f"%(prog)s {APP_VERSION}")
    parser.add_argument("--log-level", default=settings.log_level)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=UsageParser)

    p = sub.add_parser("reconstruct", help="MDL reconstruction")
    _add_data_args(p)
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--delta-theta", type=float, default=None)
    p.add_argument("--lambda-theta", type=float, default=None)
    p.add_argument("--optimize-lambda", action="store_true")
    p.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    p.add_argument("--candidates", choices=[m.value for m in CandidateMode], default=CandidateMode.EXACT.value)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-sweeps", type=int, default=DEFAULT_MAX_SWEEPS)
    p.add_argument("--bisection-iters", type=int, default=DEFAULT_BISECTION_ITERS)
    p.add_argument("--net-out", default=None, help="network edge list (sidecar written next to it)")
    p.add_argument("--out", default=None, help="RunReport JSON (default: stdout)")
    p.add_argument("--stable", action="store_true", help="omit wall_time so output is byte-stable")

    p = sub.add_parser("reconstruct-l1", help="L1-penalized baseline")
    _add_data_args(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--lambda", dest="lam", type=float)
    group.add_argument("--cv", type=int, metavar="K", help="K-fold cross-validation")
    p.add_argument("--grid", type=_grid, default=(1e-3, 1.0, 13), help="lo:hi:n or l1,l2,...")
    p.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    p.add_argument("--net-out", default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("decimate", help="decimation baseline")
    _add_data_args(p)
    p.add_argument("--step", type=float, default=0.02)
    p.add_argument("--target-E", dest="target_e", type=int, default=None)
    p.add_argument("--no-plateau", action="store_true")
    p.add_argument("--plateau-threshold", type=float, default=1e-4)
    p.add_argument("--out", default=None)

    p = sub.add_parser("sample", help="simulate data from a network")
    p.add_argument("--net", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--kinetic", type=int, metavar="M")
    group.add_argument("--equilibrium", type=int, metavar="M")
    p.add_argument("--x0", default="random", help="random | present | path to a one-column state file")
    p.add_argument("--chains", type=int, default=4)
    p.add_argument("--zero-valued", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("plant", help="planted network with normal weights")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--edges", help="unweighted edge list")
    group.add_argument("--graph", choices=sorted(BUILTIN_GRAPHS))
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--mean", type=float)
    group.add_argument("--mean-invk", action="store_true", help="mean 1/<k> = N / (2E)")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="Jaccard similarities of two networks")
    p.add_argument("--true", dest="true_net", required=True)
    p.add_argument("--hat", required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("perturb", help="macrostate perturbation")
    p.add_argument("--net", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--node", type=int)
    group.add_argument("--scan", type=int, metavar="N")
    p.add_argument("--t-relax", type=int, default=1000)
    p.add_argument("--measure", type=int, default=2000)
    p.add_argument("--blocks", type=int, default=10)
    p.add_argument("--x-init", choices=[s.value for s in InitialState], default=InitialState.RANDOM.value)
    p.add_argument("--zero-valued", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)

    return parser.parse_args(argv)


# ============== COMMANDS ==============

def _load(args: argparse.Namespace):
    alphabet = Alphabet.ZERO_VALUED if args.model.zero_valued else Alphabet.BINARY
    return parse_data_matrix(args.data, alphabet, args.model.data_kind, map_zero=args.map_zero)


def cmd_reconstruct(args: argparse.Namespace) -> int:
    data = _load(args)
    hyper = PriorHyper(
        delta=args.delta,
        lam=args.lam,
        delta_theta=args.delta_theta or args.delta,
        lambda_theta=args.lambda_theta or args.lam,
    )
    cfg = OptimizerConfig(
        kappa=args.kappa,
        bisection_iters=args.bisection_iters,
        tol_nats=args.tol,
        max_sweeps=args.max_sweeps,
        seed=args.seed,
        candidate_mode=CandidateMode(args.candidates),
        optimize_lambda=args.optimize_lambda,
        threads=args.threads,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        net, fields, report = reconstruct_mdl(data, args.model, hyper, cfg)
    if args.net_out:
        write_network(args.net_out, net, fields, labels=data.labels, model=args.model.token)
    write_report(report, args.out, exclude={"wall_time"} if args.stable else None)
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_reconstruct_l1(args: argparse.Namespace) -> int:
    data = _load(args)
    cfg = BaselineConfig(kappa=args.kappa, seed=args.seed, threads=args.threads)
    if args.cv is not None:
        cv = cross_validate_l1(data, args.model, args.cv, args.grid, cfg)
        lam = cv.lambda_hat
    else:
        cv, lam = None, args.lam
    net, fields = reconstruct_l1(data, args.model, lam, cfg)
    if args.net_out:
        write_network(args.net_out, net, fields, labels=data.labels, model=args.model.token)
    if cv is not None:
        write_report(cv.model_copy(update={"E_hat": net.E}), args.out)
    else:
        write_json({"lambda": lam, "E": net.E}, args.out)
    return EXIT_OK


def cmd_decimate(args: argparse.Namespace) -> int:
    data = _load(args)
    stop = DecimationStop(
        target_edges=args.target_e,
        use_plateau=not args.no_plateau,
        plateau_threshold=args.plateau_threshold,
    )
    cfg = BaselineConfig(seed=args.seed, threads=args.threads)
    write_decimation(decimate(data, args.model, args.step, stop, cfg), args.out)
    return EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    net, fields, sidecar = read_network(args.net)
    rng = np.random.default_rng(args.seed)
    labels = sidecar.labels if sidecar else None
    if args.kinetic is not None:
        x0 = args.x0
        if x0 not in {s.value for s in InitialState}:
            alphabet = Alphabet.ZERO_VALUED if args.zero_valued else Alphabet.BINARY
            x0 = parse_data_matrix(x0, alphabet).states[:, 0]
        data = sample_kinetic(net, fields, args.kinetic, x0, rng, args.zero_valued)
        write_data_matrix(args.out, data, labels)
        return EXIT_OK
    data, diagnostics = sample_equilibrium(net, fields, args.equilibrium, args.chains, rng, args.zero_valued)
    write_data_matrix(args.out, data, labels)
    return EXIT_OK if diagnostics.converged else EXIT_NOT_CONVERGED


def cmd_plant(args: argparse.Namespace) -> int:
    if args.graph:
        n_nodes, edges = BUILTIN_GRAPHS[args.graph](args.seed)
    else:
        n_nodes, edges = read_edge_list(args.edges)
    mean = MEAN_INVERSE_DEGREE if args.mean_invk else args.mean
    net = plant_weights(edges, mean, args.sigma, np.random.default_rng(args.seed), n_nodes=n_nodes)
    write_network(args.out, net)
    logger.info("planted %d edges on %d nodes", net.E, net.n_nodes)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    true_net, _, _ = read_network(args.true_net)
    hat_net, _, _ = read_network(args.hat)
    write_json(evaluate(true_net, hat_net), args.out)
    return EXIT_OK


def cmd_perturb(args: argparse.Namespace) -> int:
    net, fields, _ = read_network(args.net)
    mc = McSpec(t_relax=args.t_relax, n_measure=args.measure, n_blocks=args.blocks, x_init=InitialState(args.x_init))
    rng = np.random.default_rng(args.seed)
    if args.node is not None:
        results = [perturb_keystone(net, fields, args.node, mc, rng, args.zero_valued)]
    else:
        results = keystone_scan(net, fields, args.scan, mc, rng, args.zero_valued).results
    write_perturbations(results, args.out)
    return EXIT_OK if all(r.equilibrated for r in results) else EXIT_NOT_CONVERGED


COMMANDS = {
    "reconstruct": cmd_reconstruct,
    "reconstruct-l1": cmd_reconstruct_l1,
    "decimate": cmd_decimate,
    "sample": cmd_sample,
    "plant": cmd_plant,
    "eval": cmd_eval,
    "perturb": cmd_perturb,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    setup_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except (ReconstructionError, ValidationError) as e:
        logger.error("%s", e)
        return EXIT_DATA
    except ValueError as e:
        # invalid numeric options rejected by the services
        logger.error("%s", e)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
