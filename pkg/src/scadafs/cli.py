"""Command-line entry point.

Every configuration key can be set in a ``key = value`` file passed with
``--config`` and overridden by a same-named flag, e.g.
``--construction.stat_windows 20,30,60``. Flags win over the file.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import SCHEMA, Settings, load_config_file
from .errors import ConfigError, ScadaFSError
from .scada import write_csv, write_status_csv
from .synthgen import generate

logger = logging.getLogger("scadafs")

COMMANDS = {
    "generate": "write a synthetic SCADA table and status log into output_dir",
    "construct": "ingest, label and build the feature catalog and table",
    "rank": "score features on the training split, write rankings and candidates",
    "select": "floating backward search over the candidates",
    "train": "architecture scan for the final classifier on the selected subset",
    "evaluate": "score the final classifier on the held-out split",
    "pipeline": "run every stage end to end",
    "compare": "run the pipeline and the heuristic baseline side by side",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scadafs", description="Feature construction and selection for SCADA fault detection.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-vv for debug)")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    for name, help_text in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", type=Path, help="key = value configuration file")
        group = p.add_argument_group("configuration keys")
        for key, (_, default) in SCHEMA.items():
            group.add_argument(
                f"--{key}",
                dest=f"key:{key}",
                metavar="VALUE",
                default=argparse.SUPPRESS,
                help=f"(default: {default})" if default else None,
            )
    return parser


def resolve_settings(args: argparse.Namespace) -> Settings:
    layers = []
    if args.config is not None:
        layers.append(load_config_file(args.config))
    layers.append({k[4:]: v for k, v in vars(args).items() if k.startswith("key:")})
    return Settings.resolve(*layers)


def _generate(settings: Settings) -> None:
    out = Path(settings["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    table, events = generate(settings.synth())
    write_csv(table, out / "scada.csv", settings.stamp())
    write_status_csv(events, out / "status.csv", settings.stamp())
    faults = sum(e.is_generator_heating_fault for e in events)
    print(f"wrote {table.row_count} rows and {len(events)} status events ({faults} faults) to {out}")


def _print_report(report) -> None:
    sys.stdout.write("\n".join(report.lines()) + "\n")


def run(args: argparse.Namespace) -> None:
    settings = resolve_settings(args)
    cmd = args.command
    if cmd == "generate":
        _generate(settings)
    elif cmd == "construct":
        ds = pipeline.construct_stage(settings)
        counts = ds.features.family_counts()
        print(" ".join(f"{k}={v}" for k, v in counts.items()) + f" total={ds.features.n_features}")
    elif cmd == "rank":
        print("\n".join(pipeline.rank_stage(settings)))
    elif cmd == "select":
        best = pipeline.select_stage(settings)
        print(f"criterion={best.criterion!r}")
        print("\n".join(best.subset))
    elif cmd == "train":
        model = pipeline.train_stage(settings)
        a = model.architecture
        print(f"n_hidden={a.n_hidden} activation={a.hidden_activation} restart={model.restart_index}")
    elif cmd == "evaluate":
        _print_report(pipeline.evaluate_stage(settings))
    elif cmd == "pipeline":
        result = pipeline.run_pipeline(settings)
        print("subset: " + ",".join(result.subset))
        _print_report(result.report)
    elif cmd == "compare":
        sys.stdout.write(pipeline.run_comparison(settings).table())


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"scadafs: error: {exc}", file=sys.stderr)
        return exc.exit_code
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        run(args)
    except ScadaFSError as exc:
        print(f"scadafs: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"scadafs: error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
