"""Command line: bounds | simulate | mech | calibrate-test.

Configuration is an INI-style file (``key = value`` under ``[section]``
headers, one section per command) plus flag overrides. Every output file
starts with the resolved configuration, so reruns with the same config and
seed reproduce byte-identical files.

Exit status: 0 success, 2 configuration error, 3 privacy precondition
failure, 1 any other runtime failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import accountant
from .budgets import PRESETS, preset, sample_budgets
from .clip_laplace import truncated_mean, truncated_second_moment
from .data import load_idx, synth_classification
from .errors import InsufficientEchoMassError, ParameterError
from .fl_sim import Framework, TrainConfig, n_params, train
from .pipeline import aggregate, calibrate, expected_aggregate, GradientBatch, perturb_rows

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_PRECONDITION = 0, 1, 2, 3

log = logging.getLogger("apes")


class ConfigError(Exception):
    pass


DEFAULTS = {
    "bounds": {
        "presets": "Uniform2",
        "n": "10000",
        "delta_shuffle": "1e-8",
        "methods": "eon, fmt-max",
        "equal_budget": "",
    },
    "simulate": {
        "frameworks": "all",
        "epochs": "20",
        "learning_rate": "1.0",
        "prox_mu": "0.0",
        "clip": "0.1",
        "sparsify_ratio": "0.2",
        "preset": "Uniform2",
        "n_users": "200",
        "delta_shuffle": "1e-8",
        "delta_user": "3.6e-5",
        "data": "synthetic",
        "samples_per_user": "20",
        "test_size": "2000",
        "features": "78",
        "classes": "10",
        "noise": "2.0",
        "strict_privacy": "false",
        "images": "",
        "labels": "",
        "test_images": "",
        "test_labels": "",
    },
    "mech": {
        "clips": "0.01, 0.1, 0.5, 1.0",
        "epsilons": "0.05, 0.1, 0.5, 1.0, 3.0",
        "centers": "0.0, 0.5",
    },
    "calibrate-test": {
        "centers": "-0.9, -0.5, -0.3, 0.0, 0.3, 0.5, 0.9",
        "clip": "1.0",
        "preset": "Uniform2",
        "n_users": "200",
        "repetitions": "10000",
    },
}


# --------------------------------------------------------------------------
# configuration

def _line_numbers(path: Path) -> dict:
    where, section = {}, None
    for no, line in enumerate(path.read_text().splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
        elif "=" in s and section is not None and not s.startswith(("#", ";")):
            where[(section, s.split("=", 1)[0].strip().lower())] = no
    return where


class Settings:
    """Resolved key/value settings of one command, with source line context."""

    def __init__(self, command: str, values: dict, lines: dict, path: str | None):
        self.command = command
        self.values = values
        self._lines = lines
        self._path = path

    def _where(self, key):
        no = self._lines.get((self.command, key))
        return f"{self._path}:{no}: " if no else ""

    def _convert(self, key, fn):
        raw = self.values[key]
        try:
            return fn(raw)
        except (ValueError, ParameterError) as exc:
            raise ConfigError(f"{self._where(key)}bad value for {key!r} ({raw!r}): {exc}") from None

    def text(self, key):
        return self.values[key]

    def real(self, key):
        return self._convert(key, float)

    def integer(self, key):
        return self._convert(key, int)

    def seq(self, key, fn=str):
        return self._convert(key, lambda raw: [fn(x.strip()) for x in raw.split(",") if x.strip()])

    def check(self, key, fn):
        return self._convert(key, fn)


def load_settings(command: str, config_path: str | None, overrides: dict) -> Settings:
    values = dict(DEFAULTS[command])
    lines = {}
    if config_path:
        path = Path(config_path)
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with path.open() as fh:
                parser.read_file(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file {config_path} not found") from None
        except configparser.Error as exc:
            raise ConfigError(f"{config_path}: {exc}") from None
        lines = _line_numbers(path)
        if parser.has_section(command):
            for key, val in parser.items(command):
                if key not in values:
                    no = lines.get((command, key))
                    raise ConfigError(f"{config_path}:{no}: unknown key {key!r} in [{command}]")
                values[key] = val
    for key, val in overrides.items():
        if val is not None and key in values:
            values[key] = str(val)
    return Settings(command, values, lines, config_path)


# --------------------------------------------------------------------------
# output helpers

def _header(command: str, settings: Settings, seed: int) -> dict:
    return {"command": command, "seed": seed, "config": dict(sorted(settings.values.items()))}


def _write_csv(path: Path, header: dict, fields: list, rows: list) -> None:
    buf = io.StringIO()
    buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k)) for k in fields})
    path.write_text(buf.getvalue())


def _write_jsonl(path: Path, header: dict, records: list) -> None:
    lines = [json.dumps({"type": "config", **header}, sort_keys=True)]
    lines += [json.dumps(r, sort_keys=True, default=_json_default) for r in records]
    path.write_text("\n".join(lines) + "\n")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _boolean(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off", ""):
        return False
    raise ValueError("expected true or false")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o))


# --------------------------------------------------------------------------
# commands

def cmd_bounds(settings: Settings, seed: int, out: Path) -> list:
    """Central bounds of EoN and FMT-max across distributions and user counts."""
    names = settings.seq("presets")
    for name in names:
        settings.check("presets", lambda _: preset(name))
    ns = settings.seq("n", int)
    deltas = settings.seq("delta_shuffle", float)
    methods = settings.seq("methods")
    for m in methods:
        if m not in ("eon", "fmt-max"):
            raise ConfigError(f"{settings._where('methods')}unknown method {m!r}")
    equal = settings.text("equal_budget").strip()
    equal_eps = settings.real("equal_budget") if equal else None

    rows = []
    dists = [f"equal({equal_eps})"] if equal_eps is not None else names
    for dist in dists:
        for n in ns:
            if equal_eps is not None:
                budgets = np.full(n, equal_eps)
            else:
                budgets = sample_budgets(dist, n, seed=[seed, n])
            for delta in deltas:
                for method in methods:
                    fn = accountant.eon_central_bound if method == "eon" else accountant.fmt_max_baseline
                    row = {"method": method, "distribution": dist, "n": n, "delta_s": delta}
                    try:
                        b = fn(budgets, delta)
                        row.update(echo_mass=b.echo_mass, eps_c=b.eps_central,
                                   delta_c=b.delta_central, status="ok")
                    except InsufficientEchoMassError as exc:
                        row.update(echo_mass=exc.echo_mass, status="insufficient-echo-mass")
                    rows.append(row)
    header = _header("bounds", settings, seed)
    fields = ["method", "distribution", "n", "delta_s", "echo_mass", "eps_c", "delta_c", "status"]
    _write_csv(out / "bounds.csv", header, fields, rows)
    _write_jsonl(out / "bounds.jsonl", header, rows)
    return rows


def _simulation_data(settings: Settings, seed: int, n_users: int):
    if settings.text("data") == "idx":
        paths = [settings.text(k) for k in ("images", "labels", "test_images", "test_labels")]
        if not all(paths[:2]):
            raise ConfigError("data = idx requires images and labels paths")
        tr = load_idx(paths[0], paths[1])
        te = load_idx(paths[2], paths[3]) if all(paths[2:]) else None
        return tr, te
    if settings.text("data") != "synthetic":
        raise ConfigError(f"{settings._where('data')}data must be 'synthetic' or 'idx'")
    m_train = n_users * settings.integer("samples_per_user")
    m_test = settings.integer("test_size")
    ds = synth_classification(m_train + m_test, settings.integer("features"), settings.integer("classes"),
                              seed=[seed, 0xDA7A], noise=settings.real("noise"))
    return ds.subset(slice(0, m_train)), ds.subset(slice(m_train, None))


def cmd_simulate(settings: Settings, seed: int, out: Path) -> list:
    """Train every requested framework; write per-epoch metrics and a summary."""
    fws = settings.text("frameworks").strip().lower()
    frameworks = list(Framework) if fws == "all" else settings.seq("frameworks", Framework.parse)
    n_users = settings.integer("n_users")
    train_set, test_set = _simulation_data(settings, seed, n_users)
    d = n_params(train_set.n_features, train_set.classes)
    ratio = settings.real("sparsify_ratio")
    if not 0 < ratio <= 1:
        raise ConfigError(f"{settings._where('sparsify_ratio')}sparsify_ratio must lie in (0, 1]")
    budgets = sample_budgets(settings.check("preset", preset), n_users, seed=[seed, 0xB0D6])

    records, summary = [], []
    for fw in frameworks:
        config = TrainConfig(
            framework=fw,
            epochs=settings.integer("epochs"),
            learning_rate=settings.real("learning_rate"),
            prox_mu=settings.real("prox_mu"),
            clip=settings.real("clip"),
            sparsify_b=max(1, round(ratio * d)),
            budget_spec=settings.text("preset"),
            n_users=n_users,
            master_seed=seed,
            delta_shuffle=settings.real("delta_shuffle"),
            delta_user=settings.real("delta_user"),
            strict_privacy=settings.check("strict_privacy", _boolean),
        )
        result = train(config, train_set, test_set, budgets=budgets)
        for m in result.metrics:
            records.append({"type": "epoch", "framework": fw.value, **m.as_dict()})
        pr = result.privacy
        summary.append({
            "framework": fw.value,
            "eps_ul_min": pr.eps_local_user_min,
            "eps_ul_max": pr.eps_local_user_max,
            "eps_c": pr.eps_central,
            "delta_c": pr.delta_central,
            "eps_uc": pr.eps_user,
            "delta_uc": pr.delta_user,
            "accuracy": result.final_accuracy,
            "note": pr.note,
        })
    header = _header("simulate", settings, seed)
    records += [{"type": "summary", **row} for row in summary]
    _write_jsonl(out / "metrics.jsonl", header, records)
    _write_csv(out / "summary.csv", header,
               ["framework", "eps_ul_min", "eps_ul_max", "eps_c", "delta_c", "eps_uc",
                "delta_uc", "accuracy", "note"], summary)
    return summary


def cmd_mech(settings: Settings, seed: int, out: Path) -> list:
    """Analytic mean, bias and variance of Clip-Laplace vs classic Laplace."""
    rows = []
    for C in settings.seq("clips", float):
        for eps in settings.seq("epsilons", float):
            if C <= 0 or eps <= 0:
                raise ConfigError("clips and epsilons must be positive")
            lam = 2 * C / eps
            for frac in settings.seq("centers", float):
                if abs(frac) > 1:
                    raise ConfigError(f"{settings._where('centers')}centers are fractions of C in [-1, 1]")
                c = frac * C
                mean = float(truncated_mean(c, lam, C))
                second = float(truncated_second_moment(c, lam, C))
                bias = mean - c
                rows.append({"mechanism": "clip-laplace", "clip": C, "epsilon": eps, "center": c,
                             "mean": mean, "bias": bias, "variance": second - bias**2,
                             "second_moment": second})
                rows.append({"mechanism": "laplace", "clip": C, "epsilon": eps, "center": c,
                             "mean": c, "bias": 0.0, "variance": 2 * lam**2,
                             "second_moment": 2 * lam**2})
    header = _header("mech", settings, seed)
    _write_csv(out / "mech.csv", header,
               ["mechanism", "clip", "epsilon", "center", "mean", "bias", "variance",
                "second_moment"], rows)
    return rows


def cmd_calibrate_test(settings: Settings, seed: int, out: Path) -> list:
    """Round-trip and Monte-Carlo bias of calibrated vs raw aggregation."""
    C = settings.real("clip")
    n = settings.integer("n_users")
    reps = settings.integer("repetitions")
    budgets = sample_budgets(settings.check("preset", preset), n, seed=[seed, 0xB0D6])
    rows = []
    for frac in settings.seq("centers", float):
        g = frac * C
        roundtrip = float(calibrate(expected_aggregate(g, budgets, C), budgets, C))
        # every repetition is one column: n users all holding the clean value g
        G = np.full((n, reps), g)
        rngs = [np.random.default_rng([seed, 0xCA1, i]) for i in range(n)]
        noisy = perturb_rows(G, budgets, C, rngs)
        agg = aggregate(GradientBatch(noisy, budgets, C))
        cal = calibrate(agg, budgets, C)
        rows.append({
            "center": g,
            "roundtrip_error": abs(roundtrip - g),
            "raw_mean": float(agg.mean()),
            "calibrated_mean": float(cal.mean()),
            "raw_bias": float(abs(agg.mean() - g)),
            "calibrated_bias": float(abs(cal.mean() - g)),
        })
    header = _header("calibrate-test", settings, seed)
    _write_csv(out / "calibration.csv", header,
               ["center", "roundtrip_error", "raw_mean", "calibrated_mean", "raw_bias",
                "calibrated_bias"], rows)
    return rows


COMMANDS = {
    "bounds": cmd_bounds,
    "simulate": cmd_simulate,
    "mech": cmd_mech,
    "calibrate-test": cmd_calibrate_test,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="apes", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__.splitlines()[0])
        p.add_argument("--config", help="INI file; the [%s] section is read" % name)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--framework", help="simulate only: comma-separated framework names")
        p.add_argument("--preset", help=f"budget preset, one of {', '.join(PRESETS)}")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"frameworks": args.framework}
    if args.preset:
        overrides["preset" if args.command != "bounds" else "presets"] = args.preset
    try:
        settings = load_settings(args.command, args.config, overrides)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](settings, args.seed, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientEchoMassError as exc:
        print(f"precondition error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except ParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit status
        log.debug("failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
