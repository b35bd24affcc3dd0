"""Command-line interface.

Subcommands: simulate, compare, gen-dataset, train, eval-ann, bench.
Each takes a scenario/config file and an output directory. Exit codes:
0 success, 2 config error, 3 ingestion error, 4 simulation divergence,
5 training failure.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import auction as auction_mod
from .errors import (
    ConfigError,
    IngestionError,
    SimulationDivergence,
    TrainingError,
    TroughflowError,
)
from .imitation import (
    ApertureImitator,
    controller_latency,
    generate_dataset,
    load_dataset_csv,
    train_imitator,
)
from .scenario import campaign_profiles, load_profile, scenario_from_config, with_controller
from .simulate import build_features, compare_runs, run_scenario


def _out_dir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_simulate(args):
    scenario = scenario_from_config(args.config)
    out = _out_dir(args.out)
    metrics = run_scenario(scenario)
    metrics.save_csv(out / "metrics.csv")
    (out / "summary.txt").write_text(metrics.summary_text())
    print(metrics.summary_text(), end="")
    return 0


def _cmd_compare(args):
    scenario = scenario_from_config(args.config)
    if scenario.controller == "none":
        raise ConfigError("compare needs a scenario whose controller is not 'none'")
    out = _out_dir(args.out)
    baseline = run_scenario(with_controller(scenario, "none"))
    candidate = run_scenario(scenario)
    report = compare_runs(baseline, candidate)
    baseline.save_csv(out / "baseline_metrics.csv")
    candidate.save_csv(out / "candidate_metrics.csv")
    report.save_traces_csv(out / "traces.csv")
    (out / "report.txt").write_text(report.text())
    print(report.text(), end="")
    return 0


def _cmd_gen_dataset(args):
    scenario = scenario_from_config(args.config)
    if args.profiles_dir:
        paths = sorted(Path(args.profiles_dir).glob("*.csv"))
        if not paths:
            raise IngestionError(f"no profile CSVs under {args.profiles_dir}")
        profiles = [load_profile(p) for p in paths]
    else:
        profiles = campaign_profiles(args.profiles, scenario.seed)
    out = _out_dir(args.out)
    dataset = generate_dataset(scenario, profiles, args.fault_sets)
    dataset.save_csv(out / "dataset.csv")
    meta = (
        f"profiles: {len(profiles)}\n"
        f"fault_sets: {args.fault_sets}\n"
        f"samples: {dataset.x.shape[0]}\n"
        f"seed: {dataset.seed}\n"
        f"split: {len(dataset.train_idx)}/{len(dataset.val_idx)}/{len(dataset.test_idx)}\n"
    )
    (out / "dataset_meta.txt").write_text(meta)
    print(meta, end="")
    return 0


def _cmd_train(args):
    dataset = load_dataset_csv(args.dataset, seed=args.seed)
    hidden = tuple(int(s) for s in args.hidden.split(","))
    out = _out_dir(args.out)
    imitator, report = train_imitator(
        dataset, hidden_layer_sizes=hidden, max_epochs=args.max_epochs
    )
    imitator.save(out / "imitator.txt")
    (out / "training_report.txt").write_text(report.text())
    print(report.text(), end="")
    return 0


def _cmd_eval_ann(args):
    scenario = scenario_from_config(args.config)
    out = _out_dir(args.out)
    ann = with_controller(scenario, "ann", ann_model_path=args.model)
    baseline = run_scenario(with_controller(scenario, "none"))
    candidate = run_scenario(ann)
    report = compare_runs(baseline, candidate)
    baseline.save_csv(out / "baseline_metrics.csv")
    candidate.save_csv(out / "ann_metrics.csv")
    report.save_traces_csv(out / "traces.csv")
    text = report.text()
    if scenario.model != "distributed":
        auction_run = run_scenario(with_controller(scenario, "auction"))
        auction_report = compare_runs(baseline, auction_run)
        auction_run.save_csv(out / "auction_metrics.csv")
        text += "--- auction reference ---\n" + auction_report.text()
    (out / "report.txt").write_text(text)
    print(text, end="")
    return 0


def _cmd_bench(args):
    scenario = scenario_from_config(args.config)
    imitator = ApertureImitator.load(args.model)
    loop_params = scenario.loop_params()
    cfg = auction_mod.AuctionConfig(
        outer_sample_time=scenario.t_s1, controller_sample_time=scenario.t_s2
    )
    # representative midday state
    t_mid = 0.5 * sum(scenario.profile.span)
    dni, t_a, n_o = scenario.geometric_efficiency(t_mid)
    i_eff = dni * n_o
    q_total = scenario.flow.at(t_mid, i_eff)
    t_in = scenario.inlet_temperature
    apertures = np.ones(scenario.n_loops)
    t_out = np.full(scenario.n_loops, 380.0)
    loop_if = np.ones(scenario.n_loops)

    def auction_tick():
        q0 = auction_mod.flows_from_valves(apertures, q_total)
        predictor = auction_mod.make_static_predictor(loop_params, t_in, t_a, i_eff)
        flows, _ = auction_mod.allocate(q0, q_total, cfg, predictor)
        auction_mod.valves_from_flows(flows, q_total, cfg)

    features = build_features(t_in, t_out, t_a, i_eff, loop_if, apertures)

    def ann_tick():
        imitator.apertures(features)

    t_auction = controller_latency(auction_tick, repeats=args.repeats)
    t_ann = controller_latency(ann_tick, repeats=args.repeats)
    print(f"auction_tick_s: {t_auction:.3e}")
    print(f"ann_tick_s: {t_ann:.3e}")
    print(f"speedup: {t_auction / t_ann:.1f}x")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="troughflow",
        description="Auction-based flow allocation for trough solar fields",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario and export metrics")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("compare", help="scenario controller vs no-allocation")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("gen-dataset", help="closed-loop imitation dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--profiles", type=int, default=27,
                   help="synthetic profiles when no --profiles-dir")
    p.add_argument("--profiles-dir", default=None,
                   help="directory of measured profile CSVs (preferred)")
    p.add_argument("--fault-sets", type=int, default=5)
    p.set_defaults(func=_cmd_gen_dataset)

    p = sub.add_parser("train", help="train the imitation network")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--hidden", default="50,25,10")
    p.add_argument("--max-epochs", type=int, default=4000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval-ann", help="closed-loop evaluation of a model")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval_ann)

    p = sub.add_parser("bench", help="auction vs network controller latency")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--repeats", type=int, default=30)
    p.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except IngestionError as exc:
        print(f"ingestion error: {exc}", file=sys.stderr)
        return 3
    except SimulationDivergence as exc:
        print(f"simulation divergence: {exc}", file=sys.stderr)
        return 4
    except TrainingError as exc:
        print(f"training failure: {exc}", file=sys.stderr)
        return 5
    except TroughflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
