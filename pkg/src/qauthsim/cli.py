"""Command-line harness.

One subcommand per experiment. Options layer as: per-experiment defaults,
then a JSON config file (--config), then explicit flags. Exit status is 0 on
success, 2 for configuration problems, 1 for I/O failures.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import experiments as exp
from . import netsim
from .adversary import parse_behavior

EXPERIMENT_DEFAULTS = {
    "fig2_success": {"adversary": "intercept_random", "data_target": 150},
    "fig3_rounds": {"adversary": "intercept_random", "data_target": 150},
    "fig4_leakage": {"adversary": "intercept_random", "data_target": 150},
    "fig5_overhead": {"adversary": "honest", "data_target": 100},
    "custom": {},
}

_CONFIG_ALIASES = {
    "behavior": "adversary",
    "t": "t_values",
    "transfer_length": "t_values",
    "data_qubits": "data_target",
    "targets": "data_target",
    "target": "data_target",
    "seed": "master_seed",
    "format": "output_format",
}

_CONFIG_KEYS = {
    "t_values",
    "trials",
    "data_target",
    "adversary",
    "master_seed",
    "output_format",
    "out",
    "key_length",
    "key",
    "key_bits",
    "encoding_index",
    "reverse_auth",
    "payload",
    "malicious_node",
    "analytic_rounds",
}


def load_config_file(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise exp.ConfigError("config file must hold a JSON object")
    out: dict = {}
    topology_keys = {k: raw[k] for k in ("nodes", "edges", "path") if k in raw}
    if "topology" in raw:
        topology_keys = raw["topology"]
    if topology_keys:
        out["topology"] = netsim.topology_from_json(topology_keys)
    for key, value in raw.items():
        if key in ("nodes", "edges", "path", "topology"):
            continue
        key = key.lower()
        key = _CONFIG_ALIASES.get(key, key)
        if key not in _CONFIG_KEYS:
            raise exp.ConfigError(f"unknown config key {key!r}")
        if key == "t_values":
            value = tuple(value) if isinstance(value, (list, tuple)) else (int(value),)
        out[key] = value
    return out


def _add_campaign_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--transfer-length", "-T", type=int, nargs="+", metavar="T",
                     help="transfer lengths to sweep (default 1 2 3 4 5)")
    sub.add_argument("--trials", type=int, help="trials per transfer length")
    sub.add_argument("--data-qubits", type=int, dest="data_target",
                     help="data qubits to deliver per trial")
    sub.add_argument("--adversary", choices=sorted(
        {"honest", "intercept_random", "intercept_z", "intercept_x"}),
        help="repeater behavior")
    sub.add_argument("--key-length", type=int, help="fresh key length per trial")
    sub.add_argument("--key", help="fixed session key: 0/1 string or 0x-prefixed hex")
    sub.add_argument("--key-bits", type=int, help="bit length for a hex --key")
    sub.add_argument("--malicious-node", help="which path node intercepts")
    sub.add_argument("--encoding-index", type=int, choices=(0, 1),
                     help="which bit of each key pair encodes the auth value")


def _add_output_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, dest="master_seed", help="master seed")
    sub.add_argument("--format", choices=exp.OUTPUT_FORMATS, dest="output_format")
    sub.add_argument("--out", help="write output to this path instead of stdout")
    sub.add_argument("--config", help="JSON config file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qauthsim",
        description="Entanglement-based identity authentication: simulation "
        "campaigns and analytic tables.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)

    campaign_help = {
        "fig2_success": "detection success rate per transfer length",
        "fig3_rounds": "mean authentication rounds needed to detect",
        "fig4_leakage": "mean data qubits leaked before detection",
        "fig5_overhead": "auth/data qubit overhead of completed sessions",
        "custom": "fully flag-driven campaign",
    }
    for name in ("fig2_success", "fig3_rounds", "fig4_leakage", "fig5_overhead", "custom"):
        p = sub.add_parser(name, help=campaign_help[name])
        _add_campaign_options(p)
        _add_output_options(p)
        if name == "custom":
            p.add_argument("--reverse-auth", action="store_true", default=None,
                           help="authenticate in both directions each round")
            p.add_argument("--payload", help="data-qubit distribution: "
                           "uniform4, haar, or fixed:<0|1|+|->")
            p.add_argument("--trace", help="write per-trial event traces (JSONL)")
            p.add_argument("--intercept-log", help="write intercepted-qubit log (JSONL)")

    p = sub.add_parser("analytic", help="closed-form detection probability table")
    p.add_argument("--rounds", type=int, dest="analytic_rounds",
                   help="table rows 1..N (default 8)")
    _add_output_options(p)

    p = sub.add_parser("capacity", help="data-qubit capacity of one key pass")
    p.add_argument("--key-length", type=int, help="key length in bits (default 1024)")
    p.add_argument("--transfer-length", "-T", type=int, nargs="+", metavar="T")
    _add_output_options(p)

    return parser


def build_config(args: argparse.Namespace) -> exp.ExperimentConfig:
    settings: dict = {"experiment": args.experiment}
    settings.update(EXPERIMENT_DEFAULTS.get(args.experiment, {}))
    if getattr(args, "config", None):
        settings.update(load_config_file(args.config))
    flag_map = {
        "transfer_length": "t_values",
        "trials": "trials",
        "data_target": "data_target",
        "adversary": "adversary",
        "key_length": "key_length",
        "key": "key",
        "key_bits": "key_bits",
        "malicious_node": "malicious_node",
        "encoding_index": "encoding_index",
        "master_seed": "master_seed",
        "output_format": "output_format",
        "out": "out",
        "reverse_auth": "reverse_auth",
        "payload": "payload",
        "analytic_rounds": "analytic_rounds",
    }
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            settings[key] = tuple(value) if key == "t_values" else value
    return exp.ExperimentConfig(**settings)


def dispatch(cfg: exp.ExperimentConfig, args: argparse.Namespace) -> str:
    if cfg.experiment == "analytic":
        return exp.emit_rows(exp.analytic_table(cfg.analytic_rounds), cfg.output_format)
    if cfg.experiment == "capacity":
        return exp.emit_rows(
            exp.capacity_report(cfg.key_length, cfg.t_values), cfg.output_format
        )
    parse_behavior(cfg.adversary)  # fail fast on bad labels
    trace_sink = [] if getattr(args, "trace", None) else None
    intercept_sink = [] if getattr(args, "intercept_log", None) else None
    result = exp.run_experiment(cfg, trace_sink=trace_sink, intercept_sink=intercept_sink)
    if trace_sink is not None:
        _write_jsonl(args.trace, _flatten(trace_sink, "records"))
    if intercept_sink is not None:
        _write_jsonl(args.intercept_log, _flatten(intercept_sink, "events"))
    return exp.emit_campaign(result, cfg.output_format)


def _flatten(sink: list[dict], key: str):
    for entry in sink:
        meta = {"transfer_length": entry["transfer_length"],
                "trial_index": entry["trial_index"]}
        for record in entry[key]:
            yield {**meta, **record}


def _write_jsonl(path: str, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
    except (exp.ConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error reading config: {err}", file=sys.stderr)
        return 2
    try:
        text = dispatch(cfg, args)
    except (exp.ConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    if cfg.out:
        try:
            with open(cfg.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as err:
            print(f"error writing {cfg.out}: {err}", file=sys.stderr)
            return 1
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
