"""Run configuration: flat key-value text with sections, validated up front.

The INI layout mirrors the experiment pipeline: [system] holds the flow and
kick constants, [family] the circle-family spec, and one section per
subcommand holds its budgets.  parse -> serialize -> parse is the identity;
the SHA-256 of the canonical serialisation is the config hash recorded with
every sweep record.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass, field, fields

from .circle import TrigPolynomial, OneDFamily
from .kicked import HopfSystem


@dataclass
class RunConfig:
    # [system]
    omega: float = 1.0
    beta0: float = 1.0
    gamma0: float = 0.0          # gamma(mu) = gamma0 (constant multiplier)
    rho1: float = 0.55
    rho2: float = 0.45
    K4: float = 2.0
    L: float = 10.0
    mu_start: float = 0.05
    # [family]
    zeta: float = math.pi / 2
    phi_sin_coeffs: tuple = (1.0,)
    phi_cos_coeffs: tuple = ()
    # [search]
    search_L_lo: float = 100.0
    search_horizon: int = 10_000
    search_K: float = 0.0        # 0 -> adaptive
    # [sweep]
    sweep_mu_lo: float = 1e-5
    sweep_mu_hi: float = 1e-2
    sweep_points: int = 200
    sweep_a: float = 0.0
    sweep_certificate: str = ""  # path; overrides sweep_a / L when set
    sweep_iterates: int = 1_000_000
    sweep_burn_in: int = 10_000
    sweep_bins_z: int = 64
    sweep_bins_theta: int = 256
    sweep_threshold: float = 0.0
    sweep_histogram_iterates: int = 10_000_000
    sweep_second_seed: int = 1
    # [converge]
    converge_n_list: tuple = (1, 8, 60, 400, 2500)
    converge_grid_z: int = 64
    converge_grid_theta: int = 64
    converge_a_count: int = 32
    converge_order: int = 3
    perturb_mu_lo: float = 1e-10
    perturb_mu_hi: float = 1e-7
    perturb_points: int = 5
    perturb_L: float = 10.0
    # [run]
    seed: int = 0
    out_dir: str = "runs"
    workers: int = 1
    integrator_tol: float = 1e-10

    _SECTIONS = {
        "system": ("omega", "beta0", "gamma0", "rho1", "rho2", "K4", "L",
                   "mu_start"),
        "family": ("zeta", "phi_sin_coeffs", "phi_cos_coeffs"),
        "search": ("search_L_lo", "search_horizon", "search_K"),
        "sweep": ("sweep_mu_lo", "sweep_mu_hi", "sweep_points", "sweep_a",
                  "sweep_certificate", "sweep_iterates", "sweep_burn_in",
                  "sweep_bins_z", "sweep_bins_theta", "sweep_threshold",
                  "sweep_histogram_iterates", "sweep_second_seed"),
        "converge": ("converge_n_list", "converge_grid_z",
                     "converge_grid_theta", "converge_a_count",
                     "converge_order", "perturb_mu_lo", "perturb_mu_hi",
                     "perturb_points", "perturb_L"),
        "run": ("seed", "out_dir", "workers", "integrator_tol"),
    }

    # -- construction helpers ------------------------------------------------

    def family(self) -> OneDFamily:
        return OneDFamily(
            zeta=self.zeta,
            phi=TrigPolynomial(sin_coeffs=tuple(self.phi_sin_coeffs),
                               cos_coeffs=tuple(self.phi_cos_coeffs)),
            beta0=self.beta0,
        )

    def system(self, L: float | None = None, g=None, h=None) -> HopfSystem:
        b0, g0 = self.beta0, self.gamma0
        return HopfSystem(
            omega=self.omega,
            gamma=(lambda mu: g0),
            beta=(lambda mu: b0),
            rho1=self.rho1,
            rho2=self.rho2,
            L=self.L if L is None else L,
            K4=self.K4,
            g=g,
            h=h,
        )

    # -- validation ----------------------------------------------------------

    def violations(self) -> list:
        """Names of violated constraints; empty means the config is usable."""
        bad = []
        if not (0.375 < self.rho2 < 0.5):
            bad.append("rho2 in (3/8, 1/2)")
        if abs(self.rho1 + self.rho2 - 1.0) > 1e-12:
            bad.append("rho1 + rho2 = 1")
        if self.beta0 == 0.0:
            bad.append("beta0 != 0")
        if self.K4 <= 1.0:
            bad.append("K4 > 1")
        if self.L <= 0.0:
            bad.append("L > 0")
        if self.omega <= 0.0:
            bad.append("omega > 0")
        if not (0.0 <= self.sweep_a < 2 * math.pi):
            bad.append("sweep_a in [0, 2*pi)")
        if self.sweep_points < 0:
            bad.append("sweep_points >= 0")
        if len(self.converge_n_list) < 4:
            bad.append("converge_n_list needs >= 4 points for a slope")
        if self.workers < 1:
            bad.append("workers >= 1")
        if not self.phi_sin_coeffs and not self.phi_cos_coeffs:
            bad.append("family needs at least one harmonic")
        return bad

    # -- (de)serialisation ---------------------------------------------------

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        for section, names in self._SECTIONS.items():
            cp[section] = {}
            for name in names:
                val = getattr(self, name)
                if isinstance(val, tuple):
                    cp[section][name] = ",".join(repr(v) for v in val) if val else ""
                else:
                    cp[section][name] = repr(val) if not isinstance(val, str) else val
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        kwargs = {}
        type_of = {f.name: f.type for f in fields(cls)}
        defaults = cls()
        for section, names in cls._SECTIONS.items():
            if section not in cp:
                continue
            for name in names:
                if name not in cp[section]:
                    continue
                raw = cp[section][name].strip()
                current = getattr(defaults, name)
                if isinstance(current, tuple):
                    if raw == "":
                        kwargs[name] = ()
                    else:
                        vals = [float(v) for v in raw.split(",")]
                        if all(v == int(v) for v in vals) and name.endswith("n_list"):
                            kwargs[name] = tuple(int(v) for v in vals)
                        else:
                            kwargs[name] = tuple(vals)
                elif isinstance(current, bool):
                    kwargs[name] = raw.lower() in ("1", "true", "yes")
                elif isinstance(current, int):
                    kwargs[name] = int(float(raw))
                elif isinstance(current, float):
                    kwargs[name] = float(raw)
                else:
                    kwargs[name] = raw
        return cls(**kwargs)

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_ini().encode()).hexdigest()
