"""Guided and scattered waves in z-periodic pillars: command-line front end.

    pillarwave {classify,scatter,dispersion,embedded,certify} --config run.json --out DIR

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 inconclusive
certificate under ``--require-certificate``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

from . import __version__, assembly, certify, harmonics, modes, scatter
from .config import ConfigError, RunConfig, load_config
from .errors import CertificateContradiction, NearSingularSystemError, NumericalError, PillarError
from .harmonics import BlochParams, IncidentWave

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_INCONCLUSIVE = 4
COMMANDS = ("classify", "scatter", "dispersion", "embedded", "certify")


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return format(x, ".17g")
    if x is None:
        return ""
    return str(x)


def atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_bytes(columns, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue().encode("utf-8")


def json_bytes(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n").encode("utf-8")


class Outputs:
    """Collects files for one run and writes them plus a manifest."""

    def __init__(self, out: Path):
        self.out = out
        self.files: dict = {}

    def csv(self, name, columns, rows):
        data = csv_bytes(columns, rows)
        atomic_write(self.out / name, data)
        self.files[name] = {"columns": list(columns), "sha256": hashlib.sha256(data).hexdigest()}

    def json(self, name, obj):
        data = json_bytes(obj)
        atomic_write(self.out / name, data)
        self.files[name] = {"sha256": hashlib.sha256(data).hexdigest()}

    def manifest(self, command: str, cfg: RunConfig, extra: dict | None = None):
        body = {
            "tool": "pillarwave",
            "version": __version__,
            "schema_version": 1,
            "command": command,
            "config_sha256": hashlib.sha256(cfg.canonical_json().encode()).hexdigest(),
            "tolerances": cfg.numerics.model_dump(mode="json"),
            "files": self.files,
        }
        if extra:
            body["diagnostics"] = extra
        atomic_write(self.out / "manifest.json", json_bytes(_clean(body)))


def _clean(obj):
    """Replace non-finite floats so the JSON stays strict."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _m_set(cfg: RunConfig, default: int) -> list:
    m_max = cfg.numerics.m_max if cfg.numerics.m_max is not None else default
    return assembly.symmetric_m_set(m_max)


def run_classify(cfg: RunConfig, out: Outputs, args) -> int:
    t = cfg.task
    med = cfg.medium
    p = BlochParams(t.kappa, t.omega, med.eps0, med.mu0)
    m_max = cfg.numerics.m_max if cfg.numerics.m_max is not None else assembly.default_m_max(p)
    table = harmonics.classify_harmonics(p, m_max)
    out.csv("harmonics.csv", ["m", "eta_sq", "class"],
            [(h.m, float(h.eta_sq), h.cls.value) for h in table])
    dtn = harmonics.dtn_table(p, [h.m for h in table], t.ell_values, med.R)
    rows = []
    for h in dtn:
        part = "Tp" if h.cls is harmonics.HarmonicClass.PROPAGATING else "Te"
        rows.append((h.m, h.ell, h.cls.value, float(h.gamma.real), float(h.gamma.imag), part))
    out.csv("dtn.csv", ["m", "ell", "class", "re_gamma", "im_gamma", "part"], rows)
    out.manifest("classify", cfg)
    return EXIT_OK


def run_scatter(cfg: RunConfig, out: Outputs, args) -> int:
    t = cfg.task
    spec = cfg.medium.to_spec()
    p = BlochParams(t.kappa, t.omega, spec.eps0, spec.mu0)
    inc = t.incident
    w = IncidentWave(inc.m, inc.theta0, complex(*inc.amplitude))
    sol = scatter.solve_scattering(
        spec, p, w, n=cfg.numerics.n_radial, grading=cfg.numerics.grading,
        m_max=cfg.numerics.m_max, ell_max=cfg.numerics.ell_max,
        cond_limit=cfg.numerics.cond_limit, threads=args.threads,
    )
    ff = scatter.far_field(sol)
    rows = [(m, ell, float(a.real), float(a.imag)) for (m, ell), a in sorted(ff.items())]
    out.csv("far_field.csv", ["m", "ell", "re_a", "im_a"], rows)
    out.csv("field_slice.csv", ["r", "z", "re_u", "im_u"],
            scatter.field_slice(sol, t.slice_theta, t.slice_nz))
    energy = scatter.energy_balance(sol)
    out.manifest("scatter", cfg, {
        "energy_residual": energy.residual,
        "scattered_flux": energy.scattered_flux,
        "max_linear_residual": sol.diagnostics["max_residual"],
        "ell_max": sol.diagnostics["ell_max"],
        "m_max": sol.diagnostics["m_max"],
    })
    return EXIT_OK


def run_dispersion(cfg: RunConfig, out: Outputs, args) -> int:
    t = cfg.task
    spec = cfg.medium.to_spec()
    m_set = _m_set(cfg, 2)
    bracket_fn = None
    if t.omega_bracket is not None:
        bracket_fn = lambda k: tuple(t.omega_bracket)  # noqa: E731
    rows = []
    kappas = t.kappas if t.omega_bracket is not None else [k for k in t.kappas if k != 0]
    for j in t.branches:
        curve = modes.dispersion_curve(spec, kappas, ell=t.ell, branch=j, m_set=m_set,
                                       n=cfg.numerics.n_radial, bracket_fn=bracket_fn,
                                       threads=args.threads)
        rows += [(k, w, j, norm) for k, w, norm in curve.samples]
    rows.sort(key=lambda r: (r[0], r[2]))
    out.csv("dispersion.csv", ["kappa", "omega", "branch", "propagating_trace_norm"], rows)
    out.manifest("dispersion", cfg, {"samples": len(rows)})
    return EXIT_OK


def run_embedded(cfg: RunConfig, out: Outputs, args) -> int:
    t = cfg.task
    spec = cfg.medium.to_spec()
    sub = modes.SubspaceSpec(t.M, t.N)
    rows = []
    for k in sorted(t.kappas):
        r = modes.embedded_mode_search(sub, spec, k, ell=t.ell, n=cfg.numerics.n_radial,
                                       m_max=cfg.numerics.m_max, tol=cfg.numerics.verify_tol,
                                       root_tol=cfg.numerics.root_tol)
        rows.append((k, r.omega, r.scale, r.window[0], r.window[1],
                     r.report.relative_propagating_trace_norm, r.report.weak_residual,
                     r.off_lattice_content(), r.report.passed))
    out.csv("embedded.csv", ["kappa", "omega", "contrast_scale", "window_lo", "window_hi",
                             "propagating_trace_norm", "weak_residual", "off_lattice_content",
                             "verified"], rows)
    out.manifest("embedded", cfg, {"modes": len(rows)})
    return EXIT_OK if all(r[-1] for r in rows) else EXIT_NUMERICAL


def run_certify(cfg: RunConfig, out: Outputs, args) -> int:
    t = cfg.task
    spec = cfg.medium.to_spec()
    p = BlochParams(t.kappa, t.omega, spec.eps0, spec.mu0)
    certs = []
    if t.certificate in ("radius", "both"):
        certs.append(certify.certify_radius(spec, p, ell_max=cfg.numerics.ell_max or 4,
                                            m_max=cfg.numerics.m_max))
    if t.certificate in ("monotone", "both"):
        kappas = t.search_kappas if t.search_kappas is not None else [t.kappa]
        certs.append(certify.certify_monotone(spec, [k for k in kappas], n=cfg.numerics.n_radial,
                                              omega_max=t.omega_max, tol=cfg.numerics.verify_tol))
    out.json("certificate.json", _clean({"certificates": [c.to_dict() for c in certs]}))
    verdicts = [c.verdict.value for c in certs]
    out.manifest("certify", cfg, {"verdicts": verdicts})
    if args.require_certificate and any(v != certify.Verdict.NO_GUIDED_MODES.value for v in verdicts):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


RUNNERS = {
    "classify": run_classify,
    "scatter": run_scatter,
    "dispersion": run_dispersion,
    "embedded": run_embedded,
    "certify": run_certify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pillarwave", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    ap.add_argument("--out", required=True, type=Path, help="output directory")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    ap.add_argument("--require-certificate", action="store_true",
                    help="exit 4 unless every certificate says NoGuidedModes")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def _error_record(out: Path, code: int, exc: BaseException, errors=None) -> None:
    rec = {"exit_code": code, "error": type(exc).__name__, "message": str(exc)}
    if errors is not None:
        rec["errors"] = errors
    if isinstance(exc, NearSingularSystemError):
        rec.update({"omega": exc.omega, "kappa": exc.kappa, "ell": exc.ell})
    atomic_write(out / "error.json", json_bytes(_clean(rec)))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    out = args.out
    try:
        cfg = load_config(args.config, args.command)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        _error_record(out, EXIT_INVALID, exc, exc.errors)
        return EXIT_INVALID
    try:
        return RUNNERS[args.command](cfg, Outputs(out), args)
    except (NumericalError, CertificateContradiction) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        _error_record(out, EXIT_NUMERICAL, exc)
        return EXIT_NUMERICAL
    except (PillarError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        _error_record(out, EXIT_INVALID, exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
