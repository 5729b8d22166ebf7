"""INI-style run configuration.

Every key is optional; defaults give the full-size experiment::

    [mesh]      n = 64
    [field]     M = 100, corr_len = 1.0, amplitude = 0.04, kappa_floor = 0.1
    [problem]   kind = affine-linear, beta/lower/upper = model defaults
    [solver]    gap_tol = 1e-10, max_iters = 100, line_search = auto
    [study]     N_ref = 8192, N_grid = 2,8,32,128, replications = 40,
                seed = 0, scramble_seed = 0,
                reference_gap_tol = 1e-10, reference_max_iters = 500
"""
import configparser
import re

from .condgrad import SolverConfig
from .study import StudyConfig

SCHEMA = {
    "mesh": {"n": int},
    "field": {"M": int, "corr_len": float, "amplitude": float, "kappa_floor": float},
    "problem": {"kind": str, "beta": float, "lower": float, "upper": float},
    "solver": {"gap_tol": float, "max_iters": int, "line_search": str},
    "study": {
        "N_ref": int,
        "N_grid": lambda s: tuple(int(x) for x in s.replace(" ", "").split(",") if x),
        "replications": int,
        "seed": int,
        "scramble_seed": int,
        "reference_gap_tol": float,
        "reference_max_iters": int,
    },
}


class ConfigError(ValueError):
    def __init__(self, message, line=None, column=None):
        where = f"line {line}, column {column or 1}: " if line else ""
        super().__init__(where + message)
        self.line = line
        self.column = column


def _locate(text, section, key=None):
    current = None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        m = re.match(r"\[(.+)\]", stripped)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return lineno, line.index("[") + 1
        elif key is not None and current == section:
            k = re.split(r"[=:]", stripped, maxsplit=1)[0].strip()
            if k == key:
                return lineno, line.index(k) + 1
    return None, None


def parse_config(text):
    """Parse configuration text into a dict of typed values per section."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError(f"cannot parse: {exc.errors[0][1].strip() if exc.errors else exc}", lineno) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from None
    values = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", *_locate(text, section))
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in [{section}]", *_locate(text, section, key))
            try:
                values[(section, key)] = SCHEMA[section][key](raw.strip())
            except ValueError:
                raise ConfigError(
                    f"invalid value {raw!r} for '{key}' in [{section}]", *_locate(text, section, key)
                ) from None
    return values


def study_config(values, **overrides):
    """Build a :class:`StudyConfig` from parsed values plus keyword overrides."""
    g = lambda s, k, d=None: values.get((s, k), d)  # noqa: E731
    ls = g("solver", "line_search", "auto")
    ls = None if ls == "auto" else ls
    solver = SolverConfig(
        gap_tol=g("solver", "gap_tol", 1e-10),
        max_iters=g("solver", "max_iters", 100),
        line_search=ls,
    )
    reference_solver = SolverConfig(
        gap_tol=g("study", "reference_gap_tol", 1e-10),
        max_iters=g("study", "reference_max_iters", 500),
        line_search=ls,
    )
    kw = dict(
        kind=g("problem", "kind", "affine-linear"),
        n=g("mesh", "n", 64),
        M=g("field", "M", 100),
        corr_len=g("field", "corr_len", 1.0),
        amplitude=g("field", "amplitude", 0.04),
        kappa_floor=g("field", "kappa_floor", 0.1),
        beta=g("problem", "beta"),
        lower=g("problem", "lower"),
        upper=g("problem", "upper"),
        N_ref=g("study", "N_ref", 8192),
        N_grid=g("study", "N_grid", (2, 8, 32, 128)),
        replications=g("study", "replications", 40),
        seed=g("study", "seed", 0),
        scramble_seed=g("study", "scramble_seed", 0),
        solver=solver,
        reference_solver=reference_solver,
    )
    kw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return StudyConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, **overrides):
    """Read ``path`` and return ``(StudyConfig, text)``; ``path=None`` gives defaults."""
    text = ""
    if path is not None:
        with open(path) as fh:
            text = fh.read()
    return study_config(parse_config(text), **overrides), text
