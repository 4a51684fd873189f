"""Result persistence: certificate files, CSV records, binary histograms, manifests.

File formats
------------
Certificate: flat key-value text, one item per line (`key<TAB>value`), with
one `condition` line per checked condition carrying name, pass/fail, margin
and witness.  The certified parameters are written with every significant
digit of the working precision; truncating them would destroy the property
they certify.

Histogram: little-endian 16-byte header (magic ``HGR1``, u32 version, u32
rows, u32 cols) followed by rows*cols float64 values, row-major, plus a
plain-text sidecar describing axes and provenance.

Each run directory gets a manifest with SHA-256 hashes of every artifact.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

HISTOGRAM_MAGIC = b"HGR1"
HISTOGRAM_VERSION = 1

SWEEP_CSV_HEADER = ("index,n_index,a,L,mu,lambda1,stderr,escaped,"
                    "error,seed,elapsed_s")
CONVERGENCE_CSV_HEADER = "n,mu_n,c0_dist,c1_dist,c2_dist,c3_dist,fitted_slope"
PERTURBATION_CSV_HEADER = "mu,zeta_tau,theta_tilde_tau,zeta_exponent,theta_exponent"


def write_certificate(path, a_star, L_star, cert, extra: dict | None = None) -> None:
    """Serialise a Misiurewicz certificate as a key-value text document."""
    lines = []
    add = lines.append
    add(f"format\thopflab-certificate-1")
    add(f"a_star\t{_mp_str(a_star)}")
    add(f"L_star\t{_mp_str(L_star)}")
    add(f"K\t{cert.K!r}")
    add(f"sigma\t{cert.sigma!r}")
    add(f"lambda0\t{cert.lambda0!r}")
    add(f"M0\t{cert.M0}")
    add(f"d0\t{cert.d0!r}")
    add(f"delta1\t{cert.delta1!r}")
    add(f"horizon_N\t{cert.horizon_N}")
    add(f"V\t{cert.V_description}")
    if cert.pin is not None:
        add(f"fixed_point\t{_mp_str(cert.pin.fixed_point)}")
        add(f"precision_bits\t{cert.pin.precision_bits}")
        add(f"residual_log10\t{cert.pin.residual_log10!r}")
        add(f"growth_log10\t{cert.pin.growth_log10!r}")
        add(f"fixed_point_distance\t{cert.pin.distance_to_critical!r}")
    ev = cert.evidence
    add(_condition("critical_orbits",
                   ev.get("orbit_min_distance", float("nan")) >= cert.delta1,
                   ev.get("orbit_min_distance", float("nan")),
                   f"min|f'|={ev.get('orbit_min_abs_derivative', float('nan')):.6g}"))
    add(_condition("outside_expansion",
                   bool(ev.get("expansion_passed", False)),
                   ev.get("expansion_min_ratio", float("nan")),
                   "min ratio vs e^(lambda0 n)"))
    hyp = ev.get("hypotheses", {})
    for name in ("H1", "H2", "H3"):
        if name in hyp:
            add(_condition(f"hypothesis_{name}", bool(hyp[name]), float("nan"), "-"))
    if "parameter_increment_ok" in hyp:
        add(_condition("parameter_increment", bool(hyp["parameter_increment_ok"]),
                       hyp.get("parameter_increment_lhs", float("nan")),
                       "2*sqrt(2)*max|dF|*max|Delta| < eps1"))
    for key, val in (extra or {}).items():
        add(f"{key}\t{val}")
    Path(path).write_text("\n".join(lines) + "\n")


def _mp_str(x) -> str:
    s = repr(x)
    if s.startswith("mpfr("):          # mpfr('...',prec) -> bare digits
        s = s.split("'")[1]
    return s


def _condition(name: str, passed: bool, margin: float, witness: str) -> str:
    status = "pass" if passed else "fail"
    return f"condition\t{name}\t{status}\t{margin!r}\t{witness}"


def read_certificate(path) -> dict:
    """Parse a certificate file back into a dict (conditions under 'conditions')."""
    out: dict = {"conditions": {}}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        parts = line.split("\t")
        if parts[0] == "condition":
            name, status, margin, witness = parts[1], parts[2], parts[3], parts[4]
            out["conditions"][name] = {
                "passed": status == "pass",
                "margin": float(margin) if margin not in ("nan", "") else float("nan"),
                "witness": witness,
            }
        else:
            out[parts[0]] = parts[1] if len(parts) > 1 else ""
    return out


def write_histogram(path, counts: np.ndarray, description: str = "") -> None:
    """Binary histogram: 16-byte header + float64 row-major payload + sidecar."""
    counts = np.ascontiguousarray(counts, dtype="<f8")
    rows, cols = counts.shape
    header = struct.pack("<4sIII", HISTOGRAM_MAGIC, HISTOGRAM_VERSION, rows, cols)
    path = Path(path)
    path.write_bytes(header + counts.tobytes())
    sidecar = path.with_suffix(path.suffix + ".txt")
    sidecar.write_text(
        f"histogram {rows}x{cols} float64 row-major, header 16 bytes "
        f"(magic={HISTOGRAM_MAGIC.decode()}, version={HISTOGRAM_VERSION})\n"
        f"rows: z bins, cols: theta bins\n{description}\n")


def read_histogram(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    magic, version, rows, cols = struct.unpack("<4sIII", raw[:16])
    if magic != HISTOGRAM_MAGIC:
        raise ValueError(f"bad histogram magic {magic!r}")
    if version != HISTOGRAM_VERSION:
        raise ValueError(f"unsupported histogram version {version}")
    data = np.frombuffer(raw[16:], dtype="<f8", count=rows * cols)
    return data.reshape(rows, cols).copy()


def write_manifest(run_dir) -> Path:
    """SHA-256 manifest over every file in the run directory."""
    run_dir = Path(run_dir)
    entries = {}
    for f in sorted(run_dir.iterdir()):
        if f.name == "manifest.json" or f.is_dir():
            continue
        entries[f.name] = hashlib.sha256(f.read_bytes()).hexdigest()
    out = run_dir / "manifest.json"
    out.write_text(json.dumps({"files": entries}, indent=2, sort_keys=True) + "\n")
    return out


def schema_text() -> str:
    """The shipped CSV schema document."""
    here = Path(__file__).with_name("csv_schema.txt")
    return here.read_text()
