"""``litresponse {spectrum,response,moments,validate} CONFIG``.

Exit codes: 0 success, 1 numerical-check failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import math
import os
import platform
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from . import __version__
from .checks import FAIL, run_all
from .fockbasis import BasisError, EmptySpaceError, SourceFileError, load_basis, load_source_state
from .hamiltonian import DEFAULT_DENSE_CAP, HermiticityError, MonomialFileError, hermiticity_defect, load_monomials
from .kernels import BACKEND
from .moments import SOURCES
from .protocols import InversionError, InversionParams, PipelineConfig, PrescanError, run_pipeline
from .protocols.pipeline import make_provider
from .protocols.prescan import SpaceFactory, default_grid, ground_state_energy, prescan

log = logging.getLogger("litresponse")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG = 0, 1, 2
DEFAULT_K_MAX = 200
DEFAULT_OUTPUT = "litresponse_out"


class ConfigError(Exception):
    pass


class CheckFailure(Exception):
    pass


# section -> key -> (type, default); default None means optional, REQUIRED means required
REQUIRED = object()
SCHEMA = {
    "problem": {
        "basis": ("path", REQUIRED),
        "monomials": ("path", REQUIRED),
        "source": ("path", None),
        "A": ("int", None),
        "normalize": ("bool", True),
    },
    "moments": {
        "source": ("str", "recursion"),
        "shots": ("int", 10000),
        "seed": ("int", 0),
        "K_max": ("int", None),
    },
    "prescan": {
        "sigma_I": ("float", 0.05),
        "grid_step": ("float", None),
        "peak_tol": ("float", 0.02),
    },
    "response": {
        "sigma_I": ("floats", (5.0, 8.0, 11.0, 14.0)),
        "sigma_I_ref": ("float", 8.0),
        "e_window": ("float", 40.0),
        "n_points": ("int", 161),
        "amp_sigma_I": ("float", None),
        "beta": ("beta", "auto"),
        "exponent": ("float", 1.5),
        "m_max": ("int", 24),
        "plateau_tol": ("float", 0.02),
    },
    "validate": {
        "points": ("int", 100),
        "seed": ("int", 0),
        "sigma_I_min": ("float", 1.0),
        "sigma_I_max": ("float", 14.0),
        "K": ("int", 200),
        "dense_cap": ("int", DEFAULT_DENSE_CAP),
    },
    # no directory given: ./litresponse_out in the working directory
    "output": {"directory": ("path", None)},
    "run": {"threads": ("int", 0)},
}


@dataclass
class RunConfig:
    path: Path
    values: dict
    lines: dict = field(default_factory=dict)

    def __getitem__(self, key):
        section, name = key
        return self.values[section][name]

    def where(self, section, key) -> str:
        line = self.lines.get((section, key)) or self.lines.get((section, None))
        return f"{self.path}:{line}" if line else str(self.path)

    @property
    def threads(self) -> int:
        t = self["run", "threads"]
        return t if t > 0 else (os.cpu_count() or 1)

    def pipeline_config(self) -> PipelineConfig:
        inv = InversionParams(
            beta=self["response", "beta"],
            exponent=self["response", "exponent"],
            m_max=self["response", "m_max"],
            plateau_tol=self["response", "plateau_tol"],
            e_max=None,
        )
        return PipelineConfig(
            prescan_sigma_I=self["prescan", "sigma_I"],
            grid_step=self["prescan", "grid_step"],
            peak_tol=self["prescan", "peak_tol"],
            amp_sigma_I=self["response", "amp_sigma_I"],
            sigma_I_ensemble=tuple(self["response", "sigma_I"]),
            sigma_I_ref=self["response", "sigma_I_ref"],
            e_window=self["response", "e_window"],
            n_sigma_R=self["response", "n_points"],
            method=self["moments", "source"],
            shots=self["moments", "shots"],
            seed=self["moments", "seed"],
            threads=self.threads,
            inversion=inv,
        )

    def echo(self) -> dict:
        return {s: {k: (str(v) if isinstance(v, Path) else v) for k, v in kv.items()}
                for s, kv in self.values.items()}


def _line_index(text: str) -> dict:
    """``(section, key) -> line number`` (``(section, None)`` for headers)."""
    out = {}
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*\[([^\]]+)\]", raw)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), n)
            continue
        m = re.match(r"\s*([^#;=\s][^=]*?)\s*=", raw)
        if m and section is not None:
            out.setdefault((section, m.group(1).strip()), n)
    return out


def _convert(kind, raw, where, key):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        if kind == "floats":
            vals = tuple(float(t) for t in re.split(r"[,\s]+", raw.strip()) if t)
            if not vals:
                raise ValueError
            return vals
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if kind == "beta":
            low = raw.strip().lower()
            if low == "auto":
                return "auto"
            if low == "default":
                return None
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"{where}: bad value {raw!r} for {key} (expected {kind})") from None


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    lines = _line_index(text)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    cfg = RunConfig(path, {}, lines)
    base = path.parent
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{cfg.where(section, None)}: unknown section [{section}]")
        for key in cp[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"{cfg.where(section, key)}: unknown key {key!r} in [{section}]")
    for section, keys in SCHEMA.items():
        vals = {}
        for key, (kind, default) in keys.items():
            where = cfg.where(section, key)
            if cp.has_option(section, key):
                v = _convert(kind, cp[section][key], where, key)
                if kind == "path":
                    v = (base / v).resolve() if not Path(v).is_absolute() else Path(v)
            elif default is REQUIRED:
                raise ConfigError(f"{cfg.where(section, None)}: missing required key {key!r} in [{section}]")
            else:
                v = default
                if kind == "path" and v is not None:
                    v = (base / v).resolve()
            vals[key] = v
        cfg.values[section] = vals
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    for key in ("basis", "monomials", "source"):
        p = cfg["problem", key]
        if p is not None and not p.is_file():
            raise ConfigError(f"{cfg.where('problem', key)}: {key} file not found: {p}")
    if cfg["moments", "source"] not in SOURCES:
        raise ConfigError(f"{cfg.where('moments', 'source')}: moment source must be one of {', '.join(SOURCES)}")
    if cfg["moments", "shots"] < 1:
        raise ConfigError(f"{cfg.where('moments', 'shots')}: shots must be >= 1")
    if cfg["moments", "K_max"] is not None and cfg["moments", "K_max"] < 0:
        raise ConfigError(f"{cfg.where('moments', 'K_max')}: K_max must be >= 0")
    positive = [("prescan", "sigma_I"), ("response", "sigma_I_ref"), ("response", "e_window"),
                ("response", "exponent"), ("response", "plateau_tol"), ("prescan", "peak_tol")]
    for sec, key in positive:
        if not cfg[sec, key] > 0:
            raise ConfigError(f"{cfg.where(sec, key)}: {key} must be positive")
    for sec, key in (("prescan", "grid_step"), ("response", "amp_sigma_I")):
        if cfg[sec, key] is not None and not cfg[sec, key] > 0:
            raise ConfigError(f"{cfg.where(sec, key)}: {key} must be positive")
    if any(not s > 0 for s in cfg["response", "sigma_I"]):
        raise ConfigError(f"{cfg.where('response', 'sigma_I')}: every sigma_I must be positive")
    if cfg["response", "n_points"] < 2:
        raise ConfigError(f"{cfg.where('response', 'n_points')}: the sigma_R grid needs at least 2 points")
    beta = cfg["response", "beta"]
    if isinstance(beta, float) and not beta > 0:
        raise ConfigError(f"{cfg.where('response', 'beta')}: beta must be positive, 'auto' or 'default'")
    if cfg["response", "m_max"] < 2:
        raise ConfigError(f"{cfg.where('response', 'm_max')}: m_max must be >= 2")


@dataclass
class Problem:
    basis: object
    H: object
    omega: object
    A: int


def load_problem(cfg: RunConfig, need_source: bool = True) -> Problem:
    try:
        basis = load_basis(cfg["problem", "basis"])
    except (BasisError, ValueError) as exc:
        raise ConfigError(f"{cfg.where('problem', 'basis')}: {exc}") from None
    try:
        H = load_monomials(cfg["problem", "monomials"], basis)
    except (MonomialFileError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    A = cfg["problem", "A"]
    omega = None
    if cfg["problem", "source"] is not None:
        try:
            omega = load_source_state(cfg["problem", "source"], basis, A)
        except (SourceFileError, KeyError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if cfg["problem", "normalize"]:
            try:
                omega = omega.normalized()
            except ValueError:
                raise ConfigError(f"{cfg['problem', 'source']}: source state is zero") from None
        A = omega.space.A
    elif need_source:
        raise ConfigError(f"{cfg.where('problem', None)}: this command needs a source state file ([problem] source)")
    if A is None:
        raise ConfigError(f"{cfg.where('problem', None)}: set [problem] A or give a source state")
    if A <= 0 or A > basis.n_sp:
        raise ConfigError(f"{cfg.where('problem', 'A')}: A = {A} gives an empty space "
                          f"(need 1 <= A <= {basis.n_sp})")
    return Problem(basis, H, omega, A)


def _require_hermitian(prob: Problem, tol=1e-12):
    from .fockbasis import enumerate_configs

    defect = hermiticity_defect(prob.H, enumerate_configs(prob.basis, prob.A))
    if defect > tol:
        raise CheckFailure(f"Hamiltonian is not Hermitian (defect {defect:.3e})")


# ---------------------------------------------------------------- output helpers

def round12(obj):
    """Floats to 12 significant digits, recursively."""
    if isinstance(obj, float) or isinstance(obj, np.floating):
        return float(f"{float(obj):.12g}") if math.isfinite(obj) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round12(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return round12(obj.tolist())
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(round12(obj), fh, indent=2)
        fh.write("\n")


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(cfg: RunConfig, outdir: Path, command: str, outputs, extra: Optional[dict] = None):
    inputs = {}
    for key in ("basis", "monomials", "source"):
        p = cfg["problem", key]
        if p is not None:
            inputs[key] = {"path": str(p), "sha256": _sha256(p)}
    man = {
        "command": command,
        "config_path": str(cfg.path),
        "config_sha256": _sha256(cfg.path),
        "config": cfg.echo(),
        "output_directory": str(outdir),
        "inputs": inputs,
        "versions": {
            "litresponse": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(), "kernel_backend": BACKEND,
        },
        "moment_source": cfg["moments", "source"],
        "seeds": {"moments": cfg["moments", "seed"], "validate": cfg["validate", "seed"]},
        "threads": cfg.threads,
        "outputs": sorted(outputs),
    }
    if cfg["moments", "source"] == "walk+noise":
        man["shots"] = cfg["moments", "shots"]
    if extra:
        man.update(extra)
    write_json(outdir / "manifest.json", man)


def _outdir(cfg: RunConfig, override=None) -> Path:
    out = Path(override) if override else cfg["output", "directory"] or Path(DEFAULT_OUTPUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- commands

def cmd_spectrum(cfg: RunConfig, outdir: Path) -> int:
    prob = load_problem(cfg, need_source=False)
    _require_hermitian(prob)
    pc = cfg.pipeline_config()
    E1 = 0.0
    if prob.A > 1:
        E1 = ground_state_energy(prob.H, prob.A - 1, pc.prescan_sigma_I, make_provider(prob.H, prob.A - 1, pc),
                                 step=pc.grid_step, threads=pc.threads)
    provider = make_provider(prob.H, prob.A, pc)
    grid = default_grid(provider.rescaling, E1, pc.prescan_sigma_I, pc.grid_step)
    res = prescan(prob.H, SpaceFactory(prob.basis, prob.A), pc.prescan_sigma_I, grid, pc.peak_tol, provider,
                  threads=pc.threads)
    E0 = float(res.energies[0]) if res.states else float("nan")
    res.meta.update({"A": prob.A, "E0": E0, "E0_Am1": E1, "e_th": E1 - E0})
    write_json(outdir / "spectrum.json", json.loads(res.to_json()))
    res.to_csv(outdir / "spectrum.csv")
    write_manifest(cfg, outdir, "spectrum", ["spectrum.json", "spectrum.csv"],
                   {"K_max": res.meta["K_max"]})
    for s in res.states:
        print(f"E = {s.energy:.12g}  2J = {s.two_J}  parity = {s.parity:+d}")
    print(f"e_th = {E1 - E0:.12g} MeV")
    return EXIT_OK


def cmd_response(cfg: RunConfig, outdir: Path) -> int:
    prob = load_problem(cfg)
    _require_hermitian(prob)
    pc = cfg.pipeline_config()
    try:
        res = run_pipeline(prob.H, prob.omega, pc)
    except InversionError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CHECK
    outputs = ["spectrum.json", "spectrum.csv", "bound.json", "response.csv", "response.json", "report.json",
               "li_amplitude_fit.csv"]
    spec = json.loads(res.spectrum.to_json())
    spec["meta"].update({"A": prob.A, "E0": res.E0, "E0_Am1": res.E0_Am1, "e_th": res.e_th})
    write_json(outdir / "spectrum.json", spec)
    res.spectrum.to_csv(outdir / "spectrum.csv")
    write_json(outdir / "bound.json", res.peak_fit.as_dict())
    res.response.to_csv(outdir / "response.csv")
    write_json(outdir / "response.json", res.response.summary())
    res.amp_curve.to_csv(outdir / "li_amplitude_fit.csv")
    for s in pc.sigma_I_ensemble:
        for name, curves in (("li", res.li), ("li_continuum", res.li_continuum), ("li_reconstructed", res.reconstructed)):
            fname = f"{name}_sigmaI_{s:g}.csv"
            curves[s].to_csv(outdir / fname)
            outputs.append(fname)
    report = res.summary()
    report.pop("inversion")
    report["bands_overlap_fraction"] = float(np.mean(res.response.members_overlap()))
    report["band_width_over_peak"] = float(res.response.band_width().max() / max(res.response.R.max(), 1e-300))
    report["moment_source"] = pc.method
    if pc.method == "walk+noise":
        report["shots"] = pc.shots
        report["seed"] = pc.seed
    write_json(outdir / "report.json", report)
    write_manifest(cfg, outdir, "response", outputs, {"K_used": res.K_used})
    dev = res.roundtrip_deviation()
    print(f"e_th = {res.e_th:.12g} MeV, bound states: {len(res.peak_fit.energies)}, sum rule: {res.sum_rule():.6g}")
    print("round trip max rel. deviation: " + ", ".join(f"sigma_I={k:g}: {v:.3e}" for k, v in dev.items()))
    return EXIT_OK


def _moment_K(cfg: RunConfig) -> int:
    K = cfg["moments", "K_max"]
    return DEFAULT_K_MAX if K is None else K


def cmd_moments(cfg: RunConfig, outdir: Path) -> int:
    prob = load_problem(cfg)
    _require_hermitian(prob)
    pc = cfg.pipeline_config()
    provider = make_provider(prob.H, prob.A, pc)
    K = _moment_K(cfg)
    ms = provider(prob.omega.space, prob.omega, K, tag=(0xA11,))
    ms.to_json(outdir / "moments.json")
    write_manifest(cfg, outdir, "moments", ["moments.json"], {"K_max": K})
    print(f"wrote {K + 1} moments ({pc.method}) to {outdir / 'moments.json'}")
    return EXIT_OK


def cmd_validate(cfg: RunConfig, outdir: Path) -> int:
    prob = load_problem(cfg)
    results = run_all(
        prob.H, prob.omega,
        n_points=cfg["validate", "points"],
        sigma_I_range=(cfg["validate", "sigma_I_min"], cfg["validate", "sigma_I_max"]),
        seed=cfg["validate", "seed"], K=cfg["validate", "K"], cap=cfg["validate", "dense_cap"],
    )
    for r in results:
        print(r.line())
    failed = [r.name for r in results if r.status == FAIL]
    write_json(outdir / "report.json", {"checks": [r.as_dict() for r in results], "failed": failed})
    write_manifest(cfg, outdir, "validate", ["report.json"])
    if failed:
        print("failed: " + ", ".join(failed), file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


COMMANDS = {"spectrum": cmd_spectrum, "response": cmd_response, "moments": cmd_moments, "validate": cmd_validate}
HELP = {
    "spectrum": "bound levels with J labels below the one-nucleon threshold",
    "response": "Lorentz curves, bound strengths, inverted R(e) and the round-trip report",
    "moments": "Chebyshev moments of the source state as JSON",
    "validate": "cross-module consistency checks on the configured problem",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="litresponse",
        description="Response functions from Lorentz integral transforms of Chebyshev moments.",
        epilog="Exit codes: 0 success, 1 numerical-check failure, 2 configuration error.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=HELP[name], description=HELP[name])
        sp.add_argument("config", help="run configuration (INI)")
        sp.add_argument("-o", "--output", help="output directory (overrides [output] directory)")
        sp.add_argument("-v", "--verbose", action="count", default=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        outdir = _outdir(cfg, args.output)
        return COMMANDS[args.command](cfg, outdir)
    except (ConfigError, EmptySpaceError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CheckFailure, HermiticityError, PrescanError) as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
