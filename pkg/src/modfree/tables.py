"""Flat table format for kernels and grid fields.

CSV layout::

    # modfree-table v1
    # key=value            (one header line per entry, values JSON-encoded)
    [values]
    v_0                    (row-major grid values, one per line)
    ...
    [coefficients]
    re,im                  (FFT-ordered complex coefficients, row-major)
    ...

Binary layout: the magic line ``MFTB1\\n``, an 8-byte little-endian header
length, the UTF-8 JSON header, then float64 values and interleaved
(re, im) float64 coefficients, all little-endian.
"""

import json
import struct

import numpy as np

from .kernels import KernelMeta, KernelSpec
from .torus import GridField, SpectralCoeffs

MAGIC = b"MFTB1\n"


def _fmt(x):
    return repr(float(x))


def write_table(path, header, values, coeffs=None, binary=False):
    """Write a grid table (and optional coefficients) to ``path``."""
    values = np.asarray(values, dtype=float)
    header = dict(header)
    header["shape"] = list(values.shape)
    header["has_coefficients"] = coeffs is not None
    if binary:
        blob = json.dumps(header, sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            fh.write(values.astype("<f8").tobytes())
            if coeffs is not None:
                c = np.asarray(coeffs, dtype=complex)
                inter = np.stack([c.real.ravel(), c.imag.ravel()], axis=1)
                fh.write(inter.astype("<f8").tobytes())
        return
    lines = ["# modfree-table v1"]
    for key in sorted(header):
        lines.append(f"# {key}={json.dumps(header[key], sort_keys=True)}")
    lines.append("[values]")
    lines.extend(_fmt(v) for v in values.ravel())
    if coeffs is not None:
        lines.append("[coefficients]")
        c = np.asarray(coeffs, dtype=complex).ravel()
        lines.extend(f"{_fmt(z.real)},{_fmt(z.imag)}" for z in c)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_table(path):
    """Read a table written by :func:`write_table`.

    Returns
    -------
    header : dict
    values : ndarray
    coeffs : ndarray or None
    """
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
        if head == MAGIC:
            (hlen,) = struct.unpack("<Q", fh.read(8))
            header = json.loads(fh.read(hlen).decode())
            shape = tuple(header["shape"])
            size = int(np.prod(shape))
            values = np.frombuffer(fh.read(8 * size), dtype="<f8").reshape(shape)
            coeffs = None
            if header["has_coefficients"]:
                inter = np.frombuffer(fh.read(16 * size), dtype="<f8").reshape(size, 2)
                coeffs = (inter[:, 0] + 1j * inter[:, 1]).reshape(shape)
            return header, values.astype(float), coeffs
    header, vals, coefs, section = {}, [], [], None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    header[key] = json.loads(val)
                continue
            if line in ("[values]", "[coefficients]"):
                section = line
                continue
            if section == "[values]":
                vals.append(float(line))
            elif section == "[coefficients]":
                re, im = line.split(",")
                coefs.append(complex(float(re), float(im)))
            else:
                raise ValueError(f"{path}: data outside a section")
    if "shape" not in header:
        raise ValueError(f"{path}: missing shape header")
    shape = tuple(header["shape"])
    values = np.array(vals, dtype=float).reshape(shape)
    coeffs = np.array(coefs).reshape(shape) if coefs else None
    return header, values, coeffs


def _meta_dict(meta):
    return {"k": meta.k, "k_prime": meta.k_prime,
            "p": meta.p if np.isfinite(meta.p) else "inf",
            "alpha": meta.alpha, "sign": meta.sign,
            "sigma_mode": meta.sigma_mode, "singular": meta.singular}


def export_kernel(spec, path, binary=False, extra=None):
    """Write ``spec`` as a kernel table."""
    header = {"kind": "kernel", "family": spec.family, "label": spec.label,
              "dim": spec.dim, "n": spec.n, "params": spec.params,
              "meta": _meta_dict(spec.meta)}
    if extra:
        header.update(extra)
    write_table(path, header, spec.grid_table.values, spec.spectral_table.coeffs, binary)


def import_kernel(path):
    """Load a kernel table as a ``tabulated`` KernelSpec."""
    header, values, coeffs = read_table(path)
    if header.get("kind") != "kernel" or coeffs is None:
        raise ValueError(f"{path}: not a kernel table")
    m = header["meta"]
    meta = KernelMeta(float(m["k"]), float(m["k_prime"]), float(m["p"]),
                      float(m["alpha"]), m["sign"], m["sigma_mode"], bool(m["singular"]))
    c = np.array(coeffs)
    if np.max(np.abs(c.imag)) > 1e-12:
        raise ValueError(f"{path}: kernel coefficients must be real")
    params = dict(header.get("params", {}))
    params["source"] = header.get("label", header.get("family"))
    return KernelSpec("tabulated", int(header["dim"]), int(header["n"]), params,
                      GridField(values), SpectralCoeffs(c.real), meta)
