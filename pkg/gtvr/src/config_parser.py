import os
import re
from argparse import ArgumentParser as CmdArgsParser
from dataclasses import fields
from typing import Dict, List, Literal, Mapping, Optional, Sequence

import yaml
from jsonargparse import ArgumentParser as JsonArgsParser
from jsonargparse.typing import NonNegativeFloat, NonNegativeInt, PositiveFloat, PositiveInt

from gtvr.src.exceptions import ConfigError
from gtvr.src.experiments import (
    AlgorithmConfig,
    DataConfig,
    GraphConfig,
    OutputConfig,
    RunConfig,
    RunSettings,
)

ENV_PREFIX = "GTVR_"
SECTION_TYPES = {
    "graph": GraphConfig,
    "data": DataConfig,
    "algorithm": AlgorithmConfig,
    "run": RunSettings,
    "output": OutputConfig,
}
SECTIONS = tuple(SECTION_TYPES)


class ConfigSchemaParser(JsonArgsParser):
    """jsonargparse parser that raises ``ConfigError`` instead of exiting."""

    def error(self, message, *args, **kwargs):
        raise ConfigError(str(message))


def config_yaml_parser() -> JsonArgsParser:
    """
    Creates the schema of a run config.

    Sections:
    - graph: topology (ring | exponential | complete | geometric | custom), n, weights
      (auto | uniform | metropolis), radius, seed, edges
    - data: objective (quadratic | logistic), path / test_path / dim for LIBSVM data,
      synthetic parameters (samples_per_node, total_samples, p, separation, heterogeneity,
      spread, test_fraction, data_seed), lam and lam_mode (fixed | inverse_nm), partition
      (even | proportions), proportions, shuffle_seed
    - algorithm: kind (gt_saga | gt_svrg | gt_dsgd | dsgd | dsa | davrg), alpha (tuned when omitted),
      alpha_scale, svrg_T, schedule (constant | inverse), k0
    - run: iterations, target_gap, cadence, seed, jobs, resume, save_state
    - output: dir, name

    To view an example of config at "gtvr/config/quadratic/gt_saga_exponential.yaml"
    """
    p = ConfigSchemaParser()
    p.add_argument(
        "--graph.topology",
        type=Literal["ring", "exponential", "complete", "geometric", "custom"],
        default="exponential",
    )
    p.add_argument("--graph.n", type=PositiveInt, default=10)
    p.add_argument("--graph.weights", type=Literal["auto", "uniform", "metropolis"], default="auto")
    p.add_argument("--graph.radius", type=PositiveFloat, default=0.5)
    p.add_argument("--graph.seed", type=NonNegativeInt, default=0)
    p.add_argument("--graph.edges", type=Optional[List[List[int]]], default=None)

    p.add_argument("--data.objective", type=Literal["quadratic", "logistic"], default="quadratic")
    p.add_argument("--data.path", type=Optional[str], default=None)
    p.add_argument("--data.test_path", type=Optional[str], default=None)
    p.add_argument("--data.dim", type=Optional[PositiveInt], default=None)
    p.add_argument("--data.samples_per_node", type=PositiveInt, default=50)
    p.add_argument("--data.total_samples", type=Optional[PositiveInt], default=None)
    p.add_argument("--data.p", type=PositiveInt, default=10)
    p.add_argument("--data.separation", type=NonNegativeFloat, default=1.0)
    p.add_argument("--data.heterogeneity", type=NonNegativeFloat, default=1.0)
    p.add_argument("--data.spread", type=NonNegativeFloat, default=1.0)
    p.add_argument("--data.test_fraction", type=NonNegativeFloat, default=0.0)
    p.add_argument("--data.data_seed", type=NonNegativeInt, default=0)
    p.add_argument("--data.lam", type=PositiveFloat, default=0.05)
    p.add_argument("--data.lam_mode", type=Literal["fixed", "inverse_nm"], default="fixed")
    p.add_argument("--data.partition", type=Literal["even", "proportions"], default="even")
    p.add_argument("--data.proportions", type=Optional[List[PositiveFloat]], default=None)
    p.add_argument("--data.shuffle_seed", type=Optional[NonNegativeInt], default=None)

    p.add_argument(
        "--algorithm.kind",
        type=Literal["gt_saga", "gt_svrg", "gt_dsgd", "dsgd", "dsa", "davrg"],
        default="gt_saga",
    )
    p.add_argument("--algorithm.alpha", type=Optional[PositiveFloat], default=None)
    p.add_argument("--algorithm.alpha_scale", type=PositiveFloat, default=1.0)
    p.add_argument("--algorithm.svrg_T", type=Optional[PositiveInt], default=None)
    p.add_argument("--algorithm.schedule", type=Literal["constant", "inverse"], default="constant")
    p.add_argument("--algorithm.k0", type=PositiveFloat, default=1000.0)

    p.add_argument("--run.iterations", type=PositiveInt, default=1000)
    p.add_argument("--run.target_gap", type=Optional[PositiveFloat], default=None)
    p.add_argument("--run.cadence", type=Optional[PositiveInt], default=None)
    p.add_argument("--run.seed", type=NonNegativeInt, default=0)
    p.add_argument("--run.jobs", type=PositiveInt, default=1)
    p.add_argument("--run.resume", type=Optional[str], default=None)
    p.add_argument("--run.save_state", type=bool, default=False)

    p.add_argument("--output.dir", type=str, default="outputs")
    p.add_argument("--output.name", type=str, default="run")
    return p


def _schema_leaves() -> Dict[str, List[str]]:
    """Leaf name -> sections declaring it."""
    leaves: Dict[str, List[str]] = {}
    for section, section_type in SECTION_TYPES.items():
        for name in (f.name for f in fields(section_type)):
            leaves.setdefault(name, []).append(section)
    return leaves


def qualify_key(key: str) -> List[str]:
    parts = key.strip().split(".")
    if len(parts) == 2 and parts[0] in SECTIONS:
        if parts[0] in _schema_leaves().get(parts[1], []):
            return parts
        raise ConfigError(f"unknown config key in section '{parts[0]}'", field=key)
    if len(parts) == 1:
        owners = _schema_leaves().get(parts[0], [])
        if len(owners) == 1:
            return [owners[0], parts[0]]
        if len(owners) > 1:
            options = ", ".join(f"{s}.{parts[0]}" for s in owners)
            raise ConfigError(f"ambiguous key, use one of {options}", field=parts[0])
    raise ConfigError("unknown config key", field=key)


def parse_scalar(text: str):
    """YAML-typed value; YAML 1.1 reads `1e-10` as a string, so numbers are retried."""
    value = yaml.safe_load(text)
    if isinstance(value, str):
        for cast in (int, float):
            try:
                return cast(value)
            except ValueError:
                pass
    return value


def _assign(target: dict, dotted: List[str], value):
    section, leaf = dotted
    target.setdefault(section, {})
    if not isinstance(target[section], dict):
        raise ConfigError("section must be a mapping", field=section)
    target[section][leaf] = value


def parse_overrides(items: Sequence[str]) -> dict:
    """``["algorithm.alpha=0.1", "n=4"]`` -> nested dict with YAML-typed values."""
    result: dict = {}
    for item in items or ():
        key, sep, text = item.partition("=")
        if not sep:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        try:
            value = parse_scalar(text)
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse value '{text}': {e}", field=key)
        _assign(result, qualify_key(key), value)
    return result


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> dict:
    """``GTVR_RUN__ITERATIONS=50`` -> ``{"run": {"iterations": 50}}``."""
    environ = os.environ if environ is None else environ
    result: dict = {}
    for name, text in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        section, sep, leaf = name[len(ENV_PREFIX):].lower().partition("__")
        if not sep:
            continue
        if section in SECTION_TYPES:
            leaf = {f.name.lower(): f.name for f in fields(SECTION_TYPES[section])}.get(leaf, leaf)
        try:
            value = parse_scalar(text)
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse environment value '{text}': {e}", field=name)
        _assign(result, qualify_key(f"{section}.{leaf}"), value)
    return result


def merge(base: dict, update: dict) -> dict:
    merged = {k: dict(v) if isinstance(v, dict) else v for k, v in base.items()}
    for section, values in update.items():
        if isinstance(values, dict) and isinstance(merged.get(section), dict):
            merged[section].update(values)
        else:
            merged[section] = values
    return merged


def read_yaml(path: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as f:
        try:
            payload = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"{path} is not valid YAML: {e}")
    if payload is None:
        return {}
    if not isinstance(payload, dict):
        raise ConfigError(f"{path} must hold a mapping of sections")
    return payload


def _cross_checks(config: RunConfig):
    if config.algorithm.kind in ("gt_dsgd", "dsgd", "dsa", "davrg") and config.algorithm.alpha is None:
        raise ConfigError(
            "DSGD, GT-DSGD, DSA and DAVRG need an explicit step-size", field="algorithm.alpha"
        )
    if config.algorithm.schedule != "constant" and config.algorithm.kind not in ("gt_dsgd", "dsgd"):
        raise ConfigError("variance-reduced methods use a constant step-size", field="algorithm.schedule")
    if config.data.partition == "proportions" and config.data.proportions is None:
        raise ConfigError("partition 'proportions' needs a proportions list", field="data.proportions")
    if config.data.test_fraction >= 1:
        raise ConfigError(f"must be below 1, got {config.data.test_fraction}", field="data.test_fraction")
    if config.graph.topology == "custom" and not config.graph.edges:
        raise ConfigError("a custom topology needs an edge list", field="graph.edges")
    if config.data.path is not None and not os.path.exists(config.data.path):
        raise ConfigError(f"dataset file not found: {config.data.path}", field="data.path")
    if config.data.test_path is not None and not os.path.exists(config.data.test_path):
        raise ConfigError(f"dataset file not found: {config.data.test_path}", field="data.test_path")


def validate(raw: dict) -> RunConfig:
    """Type-check ``raw`` against the schema, fill defaults and return the frozen config."""
    unknown = [k for k in raw if k not in SECTIONS]
    if unknown:
        raise ConfigError(f"unknown section(s) {unknown}; expected {list(SECTIONS)}")
    try:
        namespace = config_yaml_parser().parse_object(raw)
    except ConfigError as e:
        found = re.search(r"key \"([\w.]+)\"", str(e))
        raise ConfigError(str(e), field=found.group(1) if found else None)
    payload = {
        section: {k: v for k, v in values.items() if not k.startswith("__")}
        for section, values in namespace.as_dict().items()
        if section in SECTIONS
    }
    config = RunConfig.from_dict(payload)
    _cross_checks(config)
    return config


def load_run_config(
    path: Optional[str] = None,
    overrides: Sequence[str] = (),
    environ: Optional[Mapping[str, str]] = None,
    seed: Optional[int] = None,
    jobs: Optional[int] = None,
    out: Optional[str] = None,
) -> RunConfig:
    """
    Resolve a run config: schema defaults < ``GTVR_`` environment < file < ``--set`` overrides.

    ``seed``, ``jobs`` and ``out`` are shortcuts for ``run.seed``, ``run.jobs`` and
    ``output.dir`` and win over everything else.
    """
    raw = env_overrides(environ)
    if path is not None:
        raw = merge(raw, read_yaml(path))
    raw = merge(raw, parse_overrides(overrides))
    shortcuts = {}
    if seed is not None:
        shortcuts.setdefault("run", {})["seed"] = seed
    if jobs is not None:
        shortcuts.setdefault("run", {})["jobs"] = jobs
    if out is not None:
        shortcuts.setdefault("output", {})["dir"] = out
    raw = merge(raw, shortcuts)
    return validate(raw)


def cmd_args_parser() -> CmdArgsParser:
    """
    Creates the command-line parser.

    Subcommands:
        run: one experiment from --config.
        sweep: one experiment per value of --axis.
        speedup: centralized vs decentralized gradient counts over --nodes.
        verify: property suites, exit 0 iff all pass.
        plot: SVG figures from trace CSVs.

    Shared options:
        --config (str): Path to the YAML run config.
        --set (str, repeatable): Override, e.g. ``--set algorithm.alpha=0.01``.
        --out (str): Output directory, replaces ``output.dir``.
        --seed (int): Replaces ``run.seed``.
        --jobs (int): Worker count for node updates and sweep runs.
        --verbose (bool, default=False): If True, prints the detail running.
    Returns:
        ArgumentParser: Configured argument parser.
    """
    common = CmdArgsParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="Path to the configuration file.")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="Config override."
    )
    common.add_argument("--out", type=str, default=None, help="Output directory.")
    common.add_argument("--seed", type=int, default=None, help="Run seed.")
    common.add_argument("--jobs", type=int, default=None, help="Worker count.")
    common.add_argument("--verbose", action="store_true", help="Print the detail running")

    cmd_args_parser = CmdArgsParser(prog="gtvr")
    sub = cmd_args_parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="Run one experiment.")

    sweep = sub.add_parser("sweep", parents=[common], help="Run one experiment per axis value.")
    sweep.add_argument("--axis", type=str, required=True, help="Config key to vary, e.g. graph.topology.")
    sweep.add_argument("--values", nargs="+", required=True, help="Values of the axis (YAML-typed).")
    sweep.add_argument("--threshold", type=float, default=1e-10, help="Gap for epochs-to-threshold.")

    speedup = sub.add_parser("speedup", parents=[common], help="Linear speedup study.")
    speedup.add_argument("--nodes", type=int, nargs="+", default=[2, 4, 8], help="Node counts.")
    speedup.add_argument("--threshold", type=float, default=1e-13, help="Target optimality gap.")

    sub.add_parser("verify", parents=[common], help="Run the property suites.")

    plot = sub.add_parser("plot", parents=[common], help="Plot trace CSVs as SVG.")
    plot.add_argument("traces", nargs="+", help="Trace CSV files.")
    plot.add_argument("--x-axis", dest="x_axis", choices=["epoch", "iter"], default="epoch")
    plot.add_argument("--style", type=str, default="default", help="matplotlib style sheet.")
    return cmd_args_parser
