"""Command line front end: flat configs, deterministic report files.

Subcommands map onto the library layers: ``enumerate`` streams a ball
to CSV, ``volume`` tabulates ball and skew-ball volumes along a
geometric ladder, ``asymptotics`` fits residue-class growth laws to a
volume table, ``orbit`` runs a distribution experiment, and ``report``
merges compatible CSV tables.

Configuration is a flat key-value namespace per subcommand.  Values
come from a config file (``--config``), generic ``--set key=value``
pairs, or dedicated flags; any command line value wins over the file
with a recorded warning, and dedicated flags win over ``--set``.
Unknown keys are rejected by name, and every violation is reported in
one pass.

Reports are byte-stable for identical configs: JSON keys are emitted
sorted, floats carry 12 significant digits, exact values travel as
strings like ``3/4`` and ``1/2*sqrt(2)^3``.  Exit codes partition the
failure modes: 2 configuration, 3 capacity, 4 numeric divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass
from fractions import Fraction

from .balls import BallSpec, CongruenceWindow, filter_window, iter_ball_chunks
from .equidist import ExperimentConfig, OrbitVector, parse_test, run_experiment
from .errors import (
    CapacityError,
    ConfigError,
    DegenerateSpanError,
    DivergenceError,
)
from .places import evaluate_symbolic, floor_log, set_real_precision
from .volumes import (
    SqrtPower,
    StabilizerBall,
    SymSquareUnipotentBall,
    UnipotentPairBall,
    fit_asymptotics,
    padic_sl2_ball_volume,
)

__all__ = ["RunConfig", "parse_config", "emit_report", "main"]


# ---------------------------------------------------------------------------
# value formatting

def _fmt_float(x) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise DivergenceError(f"non-finite value {x!r} in report")
    return format(x, ".12g")


def _cell(v) -> str:
    """One table cell; exact values stay exact, floats get 12 digits."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return v
    if isinstance(v, SqrtPower):
        return v.serialize()
    if isinstance(v, (int, Fraction)):
        return str(v)
    return _fmt_float(v)


def _csv_cell(v) -> str:
    s = _cell(v)
    if any(ch in s for ch in ',"\n'):
        s = '"' + s.replace('"', '""') + '"'
    return s


def _json_dump(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}  {json.dumps(str(k))}: {_json_dump(obj[k], indent + 1)}'
            for k in sorted(obj, key=str)
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}  {_json_dump(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    return json.dumps(_cell(obj))


def emit_report(report, fmt: str, path: str) -> str:
    """Serialize ``report`` to ``path``; byte-stable for equal inputs.

    ``fmt="json"`` takes a mapping; ``fmt="csv"`` takes a
    ``(header, rows)`` pair.  The whole document is rendered before the
    file is opened, so a formatting failure leaves no partial output.
    """
    if fmt == "json":
        text = _json_dump(report) + "\n"
    elif fmt == "csv":
        header, rows = report
        lines = [",".join(header)]
        lines.extend(",".join(_csv_cell(c) for c in row) for row in rows)
        text = "\n".join(lines) + "\n"
    else:
        raise ConfigError(f"unknown report format {fmt!r}")
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}")
    return path


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class _Key:
    kind: str                    # int | num | str | path | choice
    default: str | None = None   # None = required
    choices: tuple = ()


def _schema(**keys) -> dict:
    return keys


_SCHEMAS = {
    "enumerate": _schema(
        group=_Key("choice", None, ("sl2z", "sl2zp", "slnz")),
        n=_Key("int", "2"),
        p=_Key("int", "0"),
        t_inf=_Key("num"),
        t_p=_Key("str", ""),
        norm=_Key("choice", "frobenius", ("frobenius", "max")),
        window=_Key("path", ""),
        out=_Key("path"),
        capacity=_Key("int", "100000000"),
        workers=_Key("int", "0"),
    ),
    "volume": _schema(
        case=_Key("choice", None, ("stab2", "example31", "unipair", "padicball")),
        ladder=_Key("str"),
        out=_Key("path"),
        p=_Key("int", "0"),
        v=_Key("str", ""),
        v_fin=_Key("str", ""),
        g=_Key("str", ""),
        g_inf=_Key("str", ""),
        g_p=_Key("str", ""),
        t_p=_Key("str", ""),
    ),
    "asymptotics": _schema(
        input=_Key("path"),
        p=_Key("int"),
        out=_Key("path"),
        moduli=_Key("str", "1,2"),
        tol=_Key("num", "1/1000000"),
        min_per_class=_Key("int", "8"),
    ),
    "orbit": _schema(
        application=_Key("choice", None, ("ledrappier", "a21", "a22", "wedge")),
        v_inf=_Key("str"),
        v_fin=_Key("str", ""),
        p=_Key("int", "0"),
        ladder=_Key("str"),
        tests=_Key("str", ""),
        window=_Key("path", ""),
        n=_Key("int", "2"),
        k=_Key("int", "1"),
        norm=_Key("choice", "frobenius", ("frobenius", "max")),
        capacity=_Key("int", "100000000"),
        workers=_Key("int", "0"),
        seed=_Key("int", "7"),
        precision=_Key("int", "0"),
        out_json=_Key("path"),
        out_csv=_Key("path"),
    ),
    "report": _schema(
        inputs=_Key("str"),
        out=_Key("path"),
    ),
}


@dataclass(frozen=True)
class RunConfig:
    """One validated subcommand invocation.

    ``settings`` holds every schema key as a canonical string, defaults
    included, so the echo embedded in a JSON report re-parses to an
    equal config.
    """

    subcommand: str
    settings: dict
    warnings: tuple = ()

    def echo(self) -> dict:
        return dict(self.settings)

    def integer(self, key: str) -> int:
        return int(self.settings[key])

    def number(self, key: str) -> Fraction:
        return Fraction(self.settings[key])

    def __eq__(self, other):
        if not isinstance(other, RunConfig):
            return NotImplemented
        # warnings record where values came from, not what they are
        return (self.subcommand, self.settings) == (
            other.subcommand, other.settings)


def _parse_number(name: str, raw: str) -> Fraction:
    try:
        value = Fraction(raw)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{name}: expected a number, got {raw!r}")
    return value


def _canon(name: str, spec: _Key, raw: str) -> str:
    raw = raw.strip()
    if spec.kind == "int":
        try:
            return str(int(raw))
        except ValueError:
            raise ConfigError(f"{name}: expected an integer, got {raw!r}")
    if spec.kind == "num":
        return str(_parse_number(name, raw))
    if spec.kind == "choice":
        if raw not in spec.choices:
            raise ConfigError(
                f"{name}: expected one of {', '.join(spec.choices)}, got {raw!r}")
        return raw
    return raw


def _read_kv_file(path: str) -> dict:
    """Flat ``key = value`` lines; # comments and blanks ignored."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    pairs = {}
    problems = []
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        key, eq, value = s.partition("=")
        key = key.strip()
        if not eq or not key:
            problems.append(f"{path}:{lineno}: expected key = value")
            continue
        if key in pairs:
            problems.append(f"{path}:{lineno}: duplicate key {key!r}")
            continue
        pairs[key] = value.strip()
    if problems:
        raise ConfigError(problems)
    return pairs


def _writable_problem(path: str) -> str:
    parent = os.path.dirname(path) or "."
    if not os.path.isdir(parent):
        return f"output directory {parent!r} does not exist"
    if not os.access(parent, os.W_OK):
        return f"output directory {parent!r} is not writable"
    return ""


def _cross_checks(subcommand: str, settings: dict) -> list:
    problems = []
    for key in ("out", "out_json", "out_csv"):
        if key in settings:
            msg = _writable_problem(settings[key])
            if msg:
                problems.append(f"{key}: {msg}")
    if subcommand == "enumerate":
        if settings["group"] == "sl2zp" and not settings["t_p"]:
            problems.append("t_p: required for group sl2zp")
        if settings["t_p"]:
            try:
                _parse_number("t_p", settings["t_p"])
            except ConfigError as exc:
                problems.extend(exc.problems)
    if "ladder" in settings:
        try:
            _parse_ladder(settings["ladder"])
        except ConfigError as exc:
            problems.extend(exc.problems)
    if subcommand == "report" and not [s for s in settings["inputs"].split(";") if s]:
        problems.append("inputs: at least one CSV file is required")
    return problems


def parse_config(subcommand: str, flags=None, path: str | None = None) -> RunConfig:
    """Merge file and flag values into a validated RunConfig.

    Flags win over the file; each overridden key is recorded as a
    warning.  Every unknown key, missing required key, and type
    mismatch is reported together.
    """
    schema = _SCHEMAS.get(subcommand)
    if schema is None:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    merged = _read_kv_file(path) if path else {}
    warnings = []
    for key, value in dict(flags or {}).items():
        value = str(value)
        if key in merged and merged[key] != value:
            warnings.append(
                f"{key}: command line value {value!r} overrides "
                f"file value {merged[key]!r}")
        merged[key] = value
    problems = [f"unknown key {k!r}" for k in sorted(set(merged) - set(schema))]
    settings = {}
    for name, spec in schema.items():
        if name in merged:
            try:
                settings[name] = _canon(name, spec, merged[name])
            except ConfigError as exc:
                problems.extend(exc.problems)
        elif spec.default is None:
            problems.append(f"missing required key {name!r}")
        else:
            settings[name] = spec.default
    if not problems:
        problems = _cross_checks(subcommand, settings)
    if problems:
        raise ConfigError(problems)
    return RunConfig(subcommand, settings, tuple(warnings))


# ---------------------------------------------------------------------------
# shared argument parsing helpers

def _parse_ladder(text: str) -> list:
    """``t0,factor,steps`` -> exact geometric ladder values."""
    parts = [s.strip() for s in text.split(",")]
    if len(parts) != 3:
        raise ConfigError(f"ladder: expected t0,factor,steps, got {text!r}")
    t0 = _parse_number("ladder t0", parts[0])
    factor = _parse_number("ladder factor", parts[1])
    try:
        steps = int(parts[2])
    except ValueError:
        raise ConfigError(f"ladder steps: expected an integer, got {parts[2]!r}")
    if t0 <= 0 or factor <= 0 or steps < 1:
        raise ConfigError("ladder: t0, factor and steps must be positive")
    values = [t0 * factor**k for k in range(steps)]
    return [int(v) if v.denominator == 1 else v for v in values]


def _split_entries(name: str, text: str, count: int) -> list:
    parts = [s.strip() for s in text.split(",")]
    if len(parts) != count or not all(parts):
        raise ConfigError(f"{name}: expected {count} comma-separated entries")
    return parts


def _symbolic_pair(name: str, text: str) -> tuple:
    try:
        return tuple(evaluate_symbolic(e) for e in _split_entries(name, text, 2))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{name}: {exc}")


def _rational_entries(name: str, text: str, count: int):
    try:
        return tuple(Fraction(e) for e in _split_entries(name, text, count))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{name}: {exc}")


def _matrix2(name: str, text: str) -> tuple:
    a, b, c, d = _rational_entries(name, text, 4)
    if a * d - b * c != 1:
        raise ConfigError(f"{name}: determinant must be 1")
    return ((a, b), (c, d))


def _int_entries(name: str, text: str, count: int) -> tuple:
    try:
        return tuple(int(e) for e in _split_entries(name, text, count))
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}")


def _exponent_ladder(values, p: int) -> list:
    """Radii p^j -> exponents j; anything else is a config error."""
    out = []
    for v in values:
        j = floor_log(v, p)
        if Fraction(p) ** j != v:
            raise ConfigError(
                f"ladder: radius {v} is not an exact power of p={p}")
        out.append(j)
    return out


def _load_window(path: str) -> CongruenceWindow:
    pairs = _read_kv_file(path)
    unknown = sorted(set(pairs) - {"p", "m", "reps"})
    problems = [f"{path}: unknown key {k!r}" for k in unknown]
    for key in ("p", "m", "reps"):
        if key not in pairs:
            problems.append(f"{path}: missing key {key!r}")
    if problems:
        raise ConfigError(problems)
    try:
        p, m = int(pairs["p"]), int(pairs["m"])
        reps = tuple(
            _int_entries("window rep", quad, 4)
            for quad in pairs["reps"].split(";") if quad.strip()
        )
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"{path}: {exc}")
    return CongruenceWindow(p, m, reps)


def _parse_exact_value(text: str):
    text = text.strip()
    if "sqrt" in text:
        try:
            return SqrtPower.parse(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad exact value {text!r}: {exc}")
    return _parse_number("value", text)


# ---------------------------------------------------------------------------
# subcommands

def _cmd_enumerate(config: RunConfig) -> None:
    s = config.settings
    group = s["group"]
    p = config.integer("p")
    spec = BallSpec(
        group=group,
        n=config.integer("n"),
        p=p,
        t_inf=config.number("t_inf"),
        t_p=_parse_number("t_p", s["t_p"]) if s["t_p"] else None,
        norm=s["norm"],
        capacity=config.integer("capacity"),
    )
    window = _load_window(s["window"]) if s["window"] else None
    workers = config.integer("workers") or None
    dim = spec.n
    header = ["level"]
    header += [f"e{i + 1}{j + 1}" for i in range(dim) for j in range(dim)]
    header += ["norm_inf_sq", "norm_p"]
    rows = []
    for levels, mats in iter_ball_chunks(spec, workers):
        if window is not None:
            mask = filter_window(mats, window, levels=levels)
            levels, mats = levels[mask], mats[mask]
        for lev, mat in zip(levels, mats):
            m = int(lev)
            entries = [int(e) for e in mat.ravel()]
            den = p ** (2 * m) if m else 1
            if s["norm"] == "frobenius":
                num = sum(e * e for e in entries)
            else:
                top = max(abs(e) for e in entries)
                num = top * top
            norm_p = Fraction(p) ** m if group == "sl2zp" else Fraction(1)
            rows.append([m, *entries, Fraction(num, den), norm_p])
    emit_report((header, rows), "csv", s["out"])


def _volume_rows_stab2(config: RunConfig, ladder):
    s = config.settings
    ball = StabilizerBall(_symbolic_pair("v", s["v"] or "1,sqrt(2)"))
    g = _matrix2("g", s["g"] or "1,0,0,1")
    rows = []
    for t in ladder:
        tf = float(t)
        skew = ball.skew_volume(g, tf)
        plain = ball.ball_volume(tf)
        ratio = skew / plain if plain else None
        rows.append([t, 0, skew, ratio])
    return rows


def _volume_rows_example31(config: RunConfig, ladder):
    s = config.settings
    p = _require_prime(config)
    ball = SymSquareUnipotentBall(p)
    g_inf = _int_entries("g_inf", s["g_inf"] or "0,0,0", 3)
    g_p = _int_entries("g_p", s["g_p"] or "1,0,-1", 3)
    rows = []
    for n in _exponent_ladder(ladder, p):
        skew = ball.skew_volume(g_inf, g_p, n)
        plain = ball.ball_volume(n)
        rows.append([p**n, n % 2, skew, skew / plain])
    return rows


def _volume_rows_unipair(config: RunConfig, ladder):
    s = config.settings
    p = _require_prime(config)
    ball = UnipotentPairBall(
        _symbolic_pair("v", s["v"] or "1,sqrt(2)"),
        _rational_entries("v_fin", s["v_fin"] or "1,3", 2),
        p,
    )
    g_inf = _matrix2("g_inf", s["g_inf"] or "1,0,0,1")
    g_p = _matrix2("g_p", s["g_p"] or "1,0,0,1")
    t_p_fixed = _parse_number("t_p", s["t_p"]) if s["t_p"] else None
    rows = []
    for t in ladder:
        t_p = t_p_fixed if t_p_fixed is not None else t
        skew = ball.skew_volume(g_inf, g_p, float(t), t_p)
        plain = ball.ball_volume(float(t), t_p)
        ratio = skew / plain if plain else None
        rows.append([t, floor_log(t_p, p) % 2, skew, ratio])
    return rows


def _volume_rows_padicball(config: RunConfig, ladder):
    p = _require_prime(config)
    rows = []
    previous = None
    for j in _exponent_ladder(ladder, p):
        if j < 0:
            raise ConfigError("ladder: p-adic ball radii must be >= 1")
        vol = padic_sl2_ball_volume(p, j)
        # ratio column: growth against the previous rung
        rows.append([p**j, j % 2, vol, vol / previous if previous else None])
        previous = vol
    return rows


def _require_prime(config: RunConfig) -> int:
    p = config.integer("p")
    if p < 2:
        raise ConfigError("p: a prime is required for this case")
    return p


def _cmd_volume(config: RunConfig) -> None:
    s = config.settings
    ladder = _parse_ladder(s["ladder"])
    builders = {
        "stab2": _volume_rows_stab2,
        "example31": _volume_rows_example31,
        "unipair": _volume_rows_unipair,
        "padicball": _volume_rows_padicball,
    }
    rows = builders[s["case"]](config, ladder)
    emit_report((["t", "class", "volume", "ratio"], rows), "csv", s["out"])


def _cmd_asymptotics(config: RunConfig) -> None:
    s = config.settings
    try:
        with open(s["input"], newline="") as fh:
            table = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {s['input']}: {exc}")
    if not table:
        raise ConfigError(f"{s['input']}: empty table")
    header = table[0]
    try:
        it, iv = header.index("t"), header.index("volume")
    except ValueError:
        raise ConfigError(
            f"{s['input']}: need 't' and 'volume' columns, got {header}")
    ts, vols = [], []
    for row in table[1:]:
        ts.append(_parse_number("t", row[it]))
        vols.append(float(_parse_exact_value(row[iv])))
    try:
        moduli = tuple(int(x) for x in s["moduli"].split(","))
    except ValueError:
        raise ConfigError(f"moduli: expected integers, got {s['moduli']!r}")
    try:
        profile = fit_asymptotics(
            ts, vols, config.integer("p"), moduli=moduli,
            tol=float(config.number("tol")),
            min_per_class=config.integer("min_per_class"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc))
    doc = {
        "config": config.echo(),
        "p": profile.p,
        "modulus": profile.modulus,
        "ok": profile.ok,
        "message": profile.message,
        "classes": {
            str(r): {"c": c, "d": d, "e": e}
            for r, (c, d, e) in profile.classes.items()
        },
        "residuals": {str(r): v for r, v in profile.residuals.items()},
    }
    emit_report(doc, "json", s["out"])
    if not profile.ok:
        raise DivergenceError(
            profile.message or "no candidate modulus fit within tolerance")


def _slope_doc(record):
    if record is None:
        return None
    return {"exponent": record.exponent, "stderr": record.stderr,
            "against": record.against}


def _cmd_orbit(config: RunConfig) -> None:
    s = config.settings
    set_real_precision(config.integer("precision"))
    try:
        p = config.integer("p")
        inf = _split_entries("v_inf", s["v_inf"], s["v_inf"].count(",") + 1)
        fin = None
        if s["v_fin"]:
            fin = _split_entries("v_fin", s["v_fin"], s["v_fin"].count(",") + 1)
        v = OrbitVector.make(tuple(inf), fin=fin and tuple(fin), p=p)
        tests = tuple(
            parse_test(tok.strip(), p=p)
            for tok in s["tests"].split(";") if tok.strip()
        )
        window = _load_window(s["window"]) if s["window"] else None
        experiment = ExperimentConfig(
            application=s["application"],
            v=v,
            t_ladder=tuple(_parse_ladder(s["ladder"])),
            tests=tests,
            n=config.integer("n"),
            norm=s["norm"],
            window=window,
            k=config.integer("k"),
            capacity=config.integer("capacity"),
            workers=config.integer("workers") or None,
        )
        report = run_experiment(experiment, seed=config.integer("seed"))
    finally:
        set_real_precision(0)
    doc = {
        "config": config.echo(),
        "application": report.application,
        "orientation": report.orientation,
        "normalizer": report.normalizer_label,
        "flags": list(report.flags),
        "totals": [[t, c] for t, c in report.totals],
        "slope_total": _slope_doc(report.slope_total),
        "slope_first_test": _slope_doc(report.slope_first_test),
        "constant_cv": [[t, v] for t, v in report.constant_cv],
        "max_rel_error": [[t, v] for t, v in report.max_rel_error],
        "rows": [
            {
                "T": r.t,
                "test_id": r.test_id,
                "count": r.count,
                "empirical": r.empirical,
                "predicted": r.predicted,
                "ratio_target": r.ratio_target,
                "ratio_empirical": r.ratio_empirical,
                "rel_error": r.rel_error,
                "constant": r.constant,
            }
            for r in report.rows
        ],
    }
    csv_rows = [
        [r.t, r.test_id, r.empirical, r.ratio_target, r.rel_error]
        for r in report.rows
    ]
    emit_report(doc, "json", s["out_json"])
    emit_report(
        (["T", "test_id", "empirical", "ratio_target", "error"], csv_rows),
        "csv", s["out_csv"])


def _cmd_report(config: RunConfig) -> None:
    s = config.settings
    paths = [x for x in s["inputs"].split(";") if x]
    header = None
    body = []
    problems = []
    for path in paths:
        try:
            with open(path, newline="") as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            problems.append(f"cannot read {path}: {exc}")
            continue
        if not lines:
            problems.append(f"{path}: empty table")
            continue
        if header is None:
            header = lines[0]
        elif lines[0] != header:
            problems.append(
                f"{path}: header {lines[0]!r} does not match {header!r}")
            continue
        body.extend(lines[1:])
    if problems:
        raise ConfigError(problems)
    text = "\n".join([header, *body]) + "\n"
    try:
        with open(s["out"], "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {s['out']}: {exc}")


_DISPATCH = {
    "enumerate": _cmd_enumerate,
    "volume": _cmd_volume,
    "asymptotics": _cmd_asymptotics,
    "orbit": _cmd_orbit,
    "report": _cmd_report,
}


# ---------------------------------------------------------------------------
# argument parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


_FLAG_KEYS = {
    "enumerate": ("group", "n", "p", "t_inf", "t_p", "norm", "window",
                  "out", "capacity", "workers"),
    "volume": ("case", "ladder", "out", "p"),
    "asymptotics": ("input", "p", "out", "moduli", "tol", "min_per_class"),
    "orbit": (),
    "report": (),
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="orbitlab",
                     description="S-arithmetic ball volumes and orbit counts")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(sp):
        sp.add_argument("--config", dest="_config", metavar="FILE",
                        help="flat key=value config file")
        sp.add_argument("--set", dest="_set", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key")

    sp = sub.add_parser("enumerate", help="stream a lattice ball to CSV")
    common(sp)
    sp.add_argument("--group", choices=("sl2z", "sl2zp", "slnz"))
    sp.add_argument("--n", dest="n")
    sp.add_argument("--p", dest="p")
    sp.add_argument("--T-inf", dest="t_inf")
    sp.add_argument("--T-p", dest="t_p")
    sp.add_argument("--norm", choices=("frobenius", "max"))
    sp.add_argument("--window", metavar="FILE")
    sp.add_argument("--out", metavar="FILE")
    sp.add_argument("--capacity", dest="capacity")
    sp.add_argument("--workers", dest="workers")

    sp = sub.add_parser("volume", help="tabulate ball and skew-ball volumes")
    common(sp)
    sp.add_argument("--case",
                    choices=("stab2", "example31", "unipair", "padicball"))
    sp.add_argument("--params", dest="_params", nargs="*", default=[],
                    metavar="KEY=VALUE", help="case parameters")
    sp.add_argument("--ladder", metavar="T0,FACTOR,STEPS")
    sp.add_argument("--p", dest="p")
    sp.add_argument("--out", metavar="FILE")

    sp = sub.add_parser("asymptotics",
                        help="fit residue-class growth laws to a volume CSV")
    common(sp)
    sp.add_argument("--in", dest="input", metavar="FILE")
    sp.add_argument("--p", dest="p")
    sp.add_argument("--out", metavar="FILE")
    sp.add_argument("--moduli")
    sp.add_argument("--tol")
    sp.add_argument("--min-per-class", dest="min_per_class")

    sp = sub.add_parser("orbit", help="run a distribution experiment")
    common(sp)

    sp = sub.add_parser("report", help="merge compatible CSV tables")
    common(sp)
    sp.add_argument("--out", dest="_out", metavar="FILE")
    sp.add_argument("inputs", nargs="*", metavar="CSV")

    return parser


def _collect_flags(ns) -> dict:
    flags = {}
    for pair in [*getattr(ns, "_set", []), *getattr(ns, "_params", [])]:
        key, eq, value = pair.partition("=")
        if not eq or not key.strip():
            raise ConfigError(f"expected KEY=VALUE, got {pair!r}")
        flags[key.strip()] = value.strip()
    for key in _FLAG_KEYS[ns.subcommand]:
        value = getattr(ns, key, None)
        if value is not None:
            flags[key] = value
    if ns.subcommand == "report":
        if getattr(ns, "inputs", None):
            flags["inputs"] = ";".join(ns.inputs)
        if getattr(ns, "_out", None) is not None:
            flags["out"] = ns._out
    return flags


def main(argv=None) -> int:
    try:
        ns = _build_parser().parse_args(argv)
        config = parse_config(ns.subcommand, _collect_flags(ns),
                              getattr(ns, "_config", None))
        for warning in config.warnings:
            print(f"warning: {warning}", file=sys.stderr)
        _DISPATCH[config.subcommand](config)
    except ConfigError as exc:
        for msg in exc.problems:
            print(f"error: {msg}", file=sys.stderr)
        return 2
    except DegenerateSpanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
