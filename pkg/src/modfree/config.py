"""INI configuration files for the command-line tools.

Every section and key is listed in :data:`SCHEMA` with its type and
default.  Unknown sections or keys are errors.  A loaded configuration is
a plain nested dict with typed values; :func:`config_hash` fingerprints
it for output files.
"""

import configparser
import hashlib
import json


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _ints(s):
    return [int(v) for v in s.replace(",", " ").split()]


def _floats(s):
    return [float(v) for v in s.replace(",", " ").split()]


def _opt_float(s):
    return None if s.strip().lower() in ("", "none") else float(s)


SCHEMA = {
    "run": {
        "seed": (int, 0),
        "out_dir": (str, "out"),
        "workers": (int, 1),
        "binary": (_bool, False),
    },
    "kernel": {
        "label": (str, "periodic-log"),
        "n": (int, 256),
        "dim": (int, 1),
        "epsilon": (_opt_float, None),
        "doubling_C": (float, 4.0),
    },
    "particles": {
        "N": (int, 64),
        "sigma": (float, 0.5),
        "beta": (float, 0.0),
        "dt": (float, 1e-3),
        "T": (float, 0.1),
        "R": (int, 1),
        "init": (str, "uniform"),
        "stride": (int, 10),
        "r_min": (_opt_float, None),
        "allow_capped": (_bool, False),
    },
    "pde": {
        "n": (int, 128),
        "dt": (float, 1e-3),
        "T": (float, 0.1),
        "stride": (int, 10),
        "init": (str, "cosine:0.5"),
    },
    "liouville": {
        "N": (int, 2),
        "m": (int, 64),
        "dt": (float, 1e-3),
        "T": (float, 0.1),
        "stride": (int, 10),
        "init": (str, "cosine:0.5"),
        "allow_singular": (_bool, False),
    },
    "diagnostics": {
        "eta": (float, 0.25),
        "delta": (float, 1.0 / 32),
        "profile": (str, "flat"),
        "w1": (_bool, True),
    },
    "sweep": {
        "N_list": (_ints, [16, 32, 64, 128, 256]),
        "R": (int, 100),
        "distance": (str, "l1"),
        "grid": (int, 64),
    },
}


def defaults():
    return {sec: {k: v for k, (_, v) in keys.items()} for sec, keys in SCHEMA.items()}


def parse_config(text, source="<string>"):
    """Parse INI text into a typed config dict (defaults filled in)."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_string(text, source=source)
    cfg = defaults()
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ValueError(f"{source}: unknown section [{sec}]")
        for key, raw in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ValueError(f"{source}: unknown key {key!r} in [{sec}]")
            conv = SCHEMA[sec][key][0]
            try:
                cfg[sec][key] = conv(raw)
            except ValueError as exc:
                raise ValueError(f"{source}: bad value for {sec}.{key}: {exc}") from None
    return cfg


def load_config(path=None):
    if path is None:
        return defaults()
    with open(path) as fh:
        return parse_config(fh.read(), str(path))


def dump_config(cfg):
    """INI text that :func:`parse_config` reads back to ``cfg``."""
    lines = []
    for sec, keys in cfg.items():
        lines.append(f"[{sec}]")
        for k, v in keys.items():
            if isinstance(v, list):
                v = " ".join(str(x) for x in v)
            elif v is None:
                v = "none"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{k} = {v}")
        lines.append("")
    return "\n".join(lines)


# settings that never change results stay out of the fingerprint
UNHASHED = {"run": ("out_dir", "workers")}


def config_hash(cfg):
    """Short SHA-256 of the canonical JSON form of ``cfg``, minus :data:`UNHASHED`."""
    body = {sec: ({k: v for k, v in keys.items() if k not in UNHASHED.get(sec, ())}
                  if isinstance(keys, dict) else keys)
            for sec, keys in cfg.items()}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
