"""Command-line entry point.

Every command writes its tables to --out together with a manifest.json that
`riskqae.py replay` can re-run. Exit codes: 0 success, 1 usage, 2 invalid
model or circuit, 3 qubit or enumeration budget exceeded.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import settings
from amplitude_estimation import run_qae
from errors import BudgetExceededError, RiskQaeError
from GroverSensitivity import ScalingRow, SearchConfig, SearchTarget, SensitivitySearch, scaling_experiment
from oracle_theory import (ROOT_HEADERS, UNEQUAL_HEADERS, FalsePositiveRow, false_positive_sweep,
                           random_mixing_experiment, root_sweep, spread_sweep, unequal_activation_bound)
from outputs import RunManifest, write_gnuplot, write_table
from resources import compiled_counts, estimate_gates, estimate_qubits, model_estimate
from risk_model import (RiskModel, chain_model, exact_exceedance, exceedance_estimate, load_model, loss_distribution,
                        monte_carlo_loss_counts, plant_dominant_parameter)

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_BUDGET = 0, 1, 2, 3


class UsageError(Exception):
    pass


class RiskQaeParser(argparse.ArgumentParser):
    """ArgumentParser that exits with the usage code 1 instead of argparse's 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text: str) -> List[int]:
    """Comma list of ints; a-b expands to an inclusive range."""
    values = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            values.extend(range(int(lo), int(hi) + 1))
        else:
            values.append(int(part))
    return values


def _steps(text: str):
    if text == "auto":
        return text
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("steps must be a positive integer or 'auto'")
    return value


def _require_model(args) -> RiskModel:
    if not args.model:
        raise UsageError(f"'{args.command}' needs --model")
    return load_model(args.model)


# --- Commands ---

def cmd_classical(args) -> List[Path]:
    model = _require_model(args)
    if args.mode == "exact":
        dist = loss_distribution(model, args.modification)
        p = float(dist[max(0, model.threshold):].sum())
        print(f"P(loss >= {model.threshold}) = {p:.6f}")
        summary = [["exact", p, 0.0, 0]]
    else:
        shots = args.shots or 1_000_000
        counts = monte_carlo_loss_counts(model, args.modification, shots, args.seed)
        p, stderr = exceedance_estimate(counts, model.threshold)
        dist = counts / shots
        print(f"P(loss >= {model.threshold}) = {p:.6f} +/- {stderr:.6f} ({shots} draws)")
        summary = [["mc", p, stderr, shots]]
    print("loss  probability")
    for loss, prob in enumerate(dist):
        if prob > 0:
            print(f"{loss:>4}  {prob:.6f}")
    return [
        write_table(args.out, "exceedance", ["mode", "probability", "stderr", "shots"], summary, args.format),
        write_table(args.out, "loss_distribution", ["loss", "probability"],
                    [[loss, prob] for loss, prob in enumerate(dist)], args.format),
    ]


def cmd_qae(args) -> List[Path]:
    model = _require_model(args)
    result = run_qae(model, args.n_ae, args.modification, shots=args.shots or 0, seed=args.seed,
                     strategy=args.strategy, native_increments=args.native_increments)
    modes = result.modes
    print(f"modes {modes[0]}/{modes[-1]} -> P = {result.estimate:.4f}")
    print(f"exact P = {exact_exceedance(model, args.modification):.4f}")
    hist = result.histogram
    paths = [
        write_table(args.out, "qae_histogram", ["outcome", "count", "probability"], hist.rows(), args.format),
        write_table(args.out, "qae_decoded", ["outcome", "a", "P", "probability"], result.decoded_rows(), args.format),
    ]
    if args.plot:
        if args.format != "csv":
            logger.warning("--plot needs CSV tables; skipping the gnuplot script")
        else:
            paths.append(write_gnuplot(Path(args.out) / "qae_histogram.gp", paths[1], "QAE outcome distribution",
                                       "outcome", "probability", [4], ["QAE"], style="impulses"))
    return paths


def cmd_sensitivity(args) -> List[Path]:
    model = _require_model(args)
    solution = args.solution
    if args.plant:
        model, planted = plant_dominant_parameter(model, args.n_ae, index=args.plant_index)
        solution = planted.index if solution is None else solution
        target = SearchTarget.from_outcomes([planted.outcome], args.n_ae)
    elif args.targets:
        target = SearchTarget.from_outcomes(_int_list(args.targets), args.n_ae)
    elif args.target_p is not None:
        if args.at_least:
            target = SearchTarget.at_least(args.target_p, args.n_ae)
        else:
            target = SearchTarget.from_probability(args.target_p, args.n_ae, args.widen)
    else:
        raise UsageError("sensitivity needs --target-p, --targets or --plant")
    search = SensitivitySearch(model, args.n_ae, args.strategy, args.native_increments)
    config = SearchConfig(steps=args.steps, shots=args.shots if args.shots is not None else 100, seed=args.seed,
                          effective_factor=args.effective_factor)
    result = search.run(target, config, solution)
    print(f"{result.steps} Grover step(s), marked outcomes {sorted(target.outcomes)}")
    print(f"top modification {result.top} with exact probability {result.histogram.probabilities[result.top]:.4f}")
    if solution is not None:
        print(f"modification {solution}: {result.success_probability:.4f}")
    return [write_table(args.out, "sensitivity_histogram", ["outcome", "count", "probability"],
                        result.histogram.rows(), args.format)]


def cmd_scaling(args) -> List[Path]:
    models = [chain_model(n) for n in _int_list(args.sizes)]
    if not models:
        raise UsageError("--sizes selects no chain model")
    rows = scaling_experiment(models, args.confidence, args.seed, args.n_ae, args.effective_factor, args.workers)
    print("items  params  classical  quantum  steps  P(success)")
    for r in rows:
        print(f"{r.n_items:>5}  {r.n_params:>6}  {r.classical_evals:>9}  {r.quantum_model_calls:>7}  "
              f"{r.grover_steps:>5}  {r.success_probability:.3f}")
    paths = [write_table(args.out, "scaling", ScalingRow.HEADERS, [r.as_row() for r in rows], args.format)]
    if args.plot and args.format == "csv":
        paths.append(write_gnuplot(Path(args.out) / "scaling.gp", paths[0], "Model evaluations to find the planted parameter",
                                   "risk items", "model evaluations", [3, 4], ["classical", "quantum"],
                                   style="linespoints", logscale_y=True))
    return paths


def cmd_theory(args) -> List[Path]:
    if args.kind == "false-positive":
        alphas = _float_list(args.alpha)
        if args.spread:
            rows = []
            for a in alphas:
                rows += spread_sweep(args.n, a, _int_list(args.spread), args.max_steps)
        else:
            rows = false_positive_sweep(args.n, alphas, args.qubit, args.max_steps)
        for r in rows:
            print(f"M_hat={r.m_hat:.3f}  predicted {r.predicted_steps:.2f} steps, P <= {r.predicted_success:.4f}; "
                  f"peak {r.peak_success:.4f} at {r.peak_steps}")
        paths = [write_table(args.out, "false_positive", FalsePositiveRow.HEADERS, [r.as_row() for r in rows],
                             args.format)]
        if args.mixing:
            mix = random_mixing_experiment(args.n, args.seed)
            print(f"random mixing: M_hat={mix.measured_m_hat:.4f}, predicted {mix.predicted_steps:.2f}, "
                  f"peak {mix.peak_success:.4f} at {mix.peak_steps}")
            paths.append(write_table(args.out, "random_mixing",
                                     ["n", "m_hat", "predicted_steps", "peak_steps", "peak_success",
                                      "success_at_prediction"],
                                     [[mix.n, mix.measured_m_hat, mix.predicted_steps, mix.peak_steps,
                                       mix.peak_success, mix.success_at_prediction]], args.format))
        return paths
    if args.kind == "root":
        rows = root_sweep(_int_list(args.sizes), _int_list(args.k), args.max_steps)
        return [write_table(args.out, "root_oracle", ROOT_HEADERS, rows, args.format)]
    rows = []
    for a in _float_list(args.alpha):
        for r in unequal_activation_bound(a, args.k, args.n_states, 1, _int_list(args.steps)):
            rows.append([a, args.k, args.n_states, r.steps, r.success, r.root_success, r.bound, r.holds])
            print(f"alpha={a} step {r.steps}: {r.root_success:.4f} >= {r.bound:.4f} {'ok' if r.holds else 'VIOLATED'}")
    return [write_table(args.out, "unequal_activation", UNEQUAL_HEADERS, rows, args.format)]


def cmd_resources(args) -> List[Path]:
    rows = []
    if args.model:
        model = load_model(args.model)
        qubits = model_estimate(model, args.n_ae)
        n_r, n_t, n_c = len(model.items), len(model.transitions), qubits.cost
        n_params = args.n_params or model.n_params
        exact = compiled_counts(model, args.n_ae)
        rows += [[f"compiled_{k}", v] for k, v in exact.items()]
    else:
        n_r, n_t, n_c = args.n_r, args.n_t, args.n_c
        n_params = args.n_params or max(1, n_r + n_t)
        qubits = estimate_qubits(n_r, n_t, n_c, args.n_ae, args.n_s)
    gates = estimate_gates(n_r, n_t, n_c, args.n_ae, n_params, args.log_base)
    rows = qubits.rows() + gates.rows() + rows
    print(f"qubits: {qubits.headline} headline, {qubits.total} total")
    print(f"gates: m_r = {gates.model_gates:.4g}, QAE = {gates.qae_gates:.4g}, "
          f"Grover = {gates.grover_steps} x 2 x QAE = {gates.grover_total:.4g}")
    return [write_table(args.out, "resources", ["quantity", "value"], rows, args.format)]


def cmd_replay(args) -> List[Path]:
    manifest = RunManifest.load(args.manifest)
    logger.info(f"Replaying '{manifest.command}' recorded by version {manifest.tool_version}")
    if manifest.tool_version != settings.TOOL_VERSION:
        logger.warning(f"Manifest is from version {manifest.tool_version}, running {settings.TOOL_VERSION}")
    code = main(manifest.argv)
    if code != EXIT_OK:
        raise SystemExit(code)
    return [Path(p) for p in manifest.outputs]


COMMANDS = {
    "classical": cmd_classical,
    "qae": cmd_qae,
    "sensitivity": cmd_sensitivity,
    "scaling": cmd_scaling,
    "theory": cmd_theory,
    "resources": cmd_resources,
    "replay": cmd_replay,
}


def build_parser() -> RiskQaeParser:
    parser = RiskQaeParser(prog="riskqae", description="Quantum amplitude estimation and sensitivity search on risk models.")
    parser.add_argument("--model", help="Path to a model JSON file.")
    parser.add_argument("--seed", type=int, default=settings.DEFAULT_SEED, help="PRNG seed.")
    parser.add_argument("--shots", type=int, help="Samples to draw (command specific default).")
    parser.add_argument("--out", default="results", help="Output directory.")
    parser.add_argument("--format", choices=("csv", "json"), default="csv", help="Table format.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Enable verbose debug logging.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classical", help="Exact or Monte Carlo exceedance probability.")
    p.add_argument("--mode", choices=("exact", "mc"), default="exact")
    p.add_argument("--modification", type=int, default=0)

    p = sub.add_parser("qae", help="Amplitude estimation of the exceedance probability.")
    p.add_argument("--n-ae", type=int, default=8)
    p.add_argument("--modification", type=int, default=0)
    p.add_argument("--strategy", default="auto")
    p.add_argument("--native-increments", action="store_true")
    p.add_argument("--plot", action="store_true", help="Also write a gnuplot script.")

    p = sub.add_parser("sensitivity", help="Grover search over the modification register.")
    p.add_argument("--n-ae", type=int, default=8)
    p.add_argument("--target-p", type=float)
    p.add_argument("--targets", help="Comma separated QAE outcomes to mark.")
    p.add_argument("--at-least", action="store_true", help="Mark every outcome decoding to at least --target-p.")
    p.add_argument("--widen", type=int, default=0)
    p.add_argument("--steps", type=_steps, default="auto")
    p.add_argument("--effective-factor", type=float, default=1.8)
    p.add_argument("--solution", type=int, help="Modification whose success probability is reported.")
    p.add_argument("--plant", action="store_true", help="Re-tune a modification to dominate, then search for it.")
    p.add_argument("--plant-index", type=int)
    p.add_argument("--strategy", default="auto")
    p.add_argument("--native-increments", action="store_true")

    p = sub.add_parser("scaling", help="Classical versus quantum cost on the chain models.")
    p.add_argument("--sizes", default="2-7")
    p.add_argument("--confidence", type=float, default=0.70)
    p.add_argument("--n-ae", type=int, default=6)
    p.add_argument("--effective-factor", type=float, default=1.8)
    p.add_argument("--workers", type=int)
    p.add_argument("--plot", action="store_true")

    p = sub.add_parser("theory", help="Grover search with imperfect oracles.")
    p.add_argument("kind", choices=("false-positive", "root", "unequal"))
    p.add_argument("--n", type=int, default=6, help="Search qubits (false-positive).")
    p.add_argument("--alpha", default="0.45")
    p.add_argument("--qubit", type=int, default=0)
    p.add_argument("--spread", help="Qubit counts to spread alpha over, e.g. 1-3.")
    p.add_argument("--mixing", action="store_true", help="Add the random-mixing experiment.")
    p.add_argument("--sizes", default="4,8,16", help="Search space sizes (root).")
    p.add_argument("--k", default="1,2", help="Ancilla counts (root); the first value is used by unequal.")
    p.add_argument("--n-states", type=int, default=16)
    p.add_argument("--steps", default="1-3")
    p.add_argument("--max-steps", type=int)

    p = sub.add_parser("resources", help="Qubit and gate estimates.")
    p.add_argument("--n-r", type=int, default=150)
    p.add_argument("--n-t", type=int, default=250)
    p.add_argument("--n-c", type=int, default=10)
    p.add_argument("--n-ae", type=int, default=10)
    p.add_argument("--n-s", type=int)
    p.add_argument("--n-params", type=int)
    p.add_argument("--log-base", type=float, default=10.0)

    p = sub.add_parser("replay", help="Re-run the command recorded in a manifest.")
    p.add_argument("manifest")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
        logger.debug("Verbose logging enabled.")

    if args.command == "theory" and args.kind == "unequal":
        args.k = _int_list(args.k)[0]

    try:
        paths = COMMANDS[args.command](args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        logger.error(str(e))
        return EXIT_USAGE
    except BudgetExceededError as e:
        logger.error(f"Budget exceeded: {e}")
        return EXIT_BUDGET
    except (RiskQaeError, ValueError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_INVALID
    except FileNotFoundError as e:
        logger.error(f"File not found: {e.filename}")
        return EXIT_INVALID

    if args.command != "replay":
        params = {k: v for k, v in vars(args).items()
                  if k not in ("model", "seed", "out", "format", "verbose", "command")}
        manifest = RunManifest(command=args.command, argv=argv, model_path=args.model, parameters=params,
                               seed=args.seed, outputs=[str(p) for p in paths])
        manifest.save(args.out)
    logger.info(f"Wrote {', '.join(str(p) for p in paths)}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
