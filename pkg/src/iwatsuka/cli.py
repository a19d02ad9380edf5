"""Command-line front end: ``iwatsuka <command> [options]``.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numeric or convergence error. Errors are also written to stderr as one
JSON object.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import report
from .bands import bands_to_csv, default_k_range, spectrum_bands, sweep_bands
from .conductance import SCHEMA as CONDUCTANCE_SCHEMA
from .conductance import compute_conductance
from .errors import ConfigurationError, IwatsukaError
from .fiber import SolverConfig
from .perturbation import (
    DEFAULT_K0,
    gap_persistence_interval,
    invariance_check,
    perturbation_from_config,
    perturbation_to_config,
    persistence_spec_for,
    strip_zero_check,
)
from .profiles import PotentialBeta, load_config, make_switch, profile_from_config, profile_to_config
from .scaling import InterfaceShape, band_infimum, scaling_table, scaling_to_csv
from .verification import ExampleSet, acceptance_report, run_all

COMMANDS = ("bands", "spectrum", "conductance", "perturb", "scaling", "verify-all")


@dataclass(frozen=True)
class RunConfig:
    command: str
    profile_path: Optional[Path] = None
    interval: Optional[tuple] = None
    j_max: Optional[int] = None
    k_range: Optional[tuple] = None
    tol: float = SolverConfig.tol
    output_dir: Path = Path("out")
    emit_plots: bool = False
    n_k: int = SolverConfig.n_k

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}")
        if self.profile_path is not None and not Path(self.profile_path).is_file():
            raise ConfigurationError(f"profile file not found: {self.profile_path}")
        if self.interval is not None and not self.interval[0] < self.interval[1]:
            raise ConfigurationError(f"interval must satisfy lo < hi, got {self.interval}")
        if self.k_range is not None and not self.k_range[0] < self.k_range[1]:
            raise ConfigurationError(f"k range must satisfy lo < hi, got {self.k_range}")
        if not self.tol > 0:
            raise ConfigurationError("tolerance must be positive")
        if self.j_max is not None and self.j_max < 1:
            raise ConfigurationError("jmax must be >= 1")

    def solver(self):
        return SolverConfig(tol=self.tol, convergence_tol=max(self.tol * 10.0, SolverConfig.convergence_tol),
                            n_k=self.n_k)


def _pair(text):
    try:
        parts = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI numbers, got {text!r}")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}")
    return tuple(parts)


def _krange(text):
    if "," in text:
        return _pair(text)
    try:
        k = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected K or LO,HI, got {text!r}")
    return (-abs(k), abs(k))


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser():
    parser = argparse.ArgumentParser(prog="iwatsuka", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, profile=True, interval=False):
        if profile:
            p.add_argument("--profile", type=Path, required=True, help="profile YAML file")
        if interval:
            p.add_argument("--interval", type=_pair, help="energy window LO,HI")
        p.add_argument("--jmax", type=int, help="number of bands")
        p.add_argument("--krange", type=_krange, help="K (meaning -K,K) or LO,HI")
        p.add_argument("--nk", type=int, default=SolverConfig.n_k, help="k samples (default %(default)s)")
        p.add_argument("--tol", type=float, default=SolverConfig.tol, help="eigenvalue tolerance")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--plots", action="store_true", help="also write SVG band diagrams")

    common(sub.add_parser("bands", help="band table E_j(k) as CSV"), interval=True)
    common(sub.add_parser("spectrum", help="spectrum of the 2-D operator as intervals"))
    common(sub.add_parser("conductance", help="edge conductance in a window, both methods"), interval=True)
    common(sub.add_parser("perturb", help="conductance before/after a compact perturbation"), interval=True)
    p = sub.add_parser("scaling", help="ground energy under field scaling")
    common(p, profile=False)
    p.add_argument("--shape", choices=("sharp", "smooth"), default="sharp")
    p.add_argument("--q", type=_pair, default=(-1.0, 1.0), help="smooth interface bounds Q-,Q+")
    p.add_argument("--fields", type=_floats, default=(1.0, 4.0, 16.0), help="field strengths B")
    p = sub.add_parser("verify-all", help="run the acceptance matrix")
    common(p, profile=False)
    p.add_argument("--examples", type=Path, help="example profile directory (default: shipped set)")
    return parser


def _run_config(args):
    return RunConfig(
        command=args.command,
        profile_path=getattr(args, "profile", None),
        interval=getattr(args, "interval", None),
        j_max=args.jmax,
        k_range=args.krange,
        tol=args.tol,
        output_dir=args.out,
        emit_plots=args.plots,
        n_k=args.nk,
    )


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    print(path)


def _load(rc):
    raw = load_config(rc.profile_path)
    return raw, profile_from_config(raw)


def _interval(rc, raw):
    if rc.interval is not None:
        return rc.interval
    if "interval" in raw:
        lo, hi = (float(v) for v in raw["interval"])
        if not lo < hi:
            raise ConfigurationError(f"interval must satisfy lo < hi, got {raw['interval']}")
        return lo, hi
    raise ConfigurationError("an energy interval is required (--interval LO,HI or 'interval' in the profile)")


def _csv_header(rc, profile, extra=None):
    head = report.header(rc.command, rc.solver(), profile=profile_to_config(profile), **(extra or {}))
    return json.dumps(head, sort_keys=True)


def cmd_bands(rc):
    raw, profile = _load(rc)
    pb = PotentialBeta(profile)
    cfg = rc.solver()
    j_max = rc.j_max or 6
    interval = rc.interval or (tuple(raw["interval"]) if "interval" in raw else None)
    e_top = (2 * j_max + 1) * max(abs(profile.b_minus), abs(profile.b_plus))
    lo, hi = rc.k_range or default_k_range(pb, e_top)
    table = sweep_bands(pb, np.linspace(lo, hi, rc.n_k), j_max, cfg)
    header = _csv_header(rc, profile, {"j_max": j_max, "k_range": [lo, hi]})
    _write(rc.output_dir / "bands.csv", bands_to_csv(table, header))
    if rc.emit_plots:
        from .plots import band_diagram

        _write(rc.output_dir / "bands.svg", band_diagram(table, interval, title=rc.profile_path.stem))
    return 0


def cmd_spectrum(rc):
    _, profile = _load(rc)
    bm, bp = profile.b_minus, profile.b_plus
    if bm * bp > 0:
        lo, hi = sorted((abs(bm), abs(bp)))
        if lo == hi:
            j_max = rc.j_max or 6
            intervals = [((2 * j - 1) * lo, (2 * j - 1) * lo) for j in range(1, j_max + 1)]
        else:
            intervals = spectrum_bands(lo, hi, rc.j_max)
        method = "closed_form"
    else:
        intervals = [(band_infimum(PotentialBeta(profile), rc.solver()), math.inf)]
        method = "band_infimum"
    out = {
        "schema": "iwatsuka.spectrum/1",
        "config": report.header(rc.command, rc.solver(), profile=profile_to_config(profile), j_max=rc.j_max),
        "method": method,
        "intervals": [list(iv) for iv in intervals],
    }
    _write(rc.output_dir / "spectrum.json", report.dumps(out))
    return 0


def _conductance_dict(rep):
    return {
        "interval": [rep.spec.lo, rep.spec.hi],
        "gap_indices": {"n_minus": rep.spec.n_minus, "n_plus": rep.spec.n_plus},
        "predicted": rep.predicted,
        "asymptotic": rep.asymptotic.as_dict(),
        "spectral_flow": rep.spectral_flow.as_dict(),
        "methods_agree": rep.methods_agree,
        "j_max": rep.j_max,
        "n_k": rep.n_k,
    }


def cmd_conductance(rc):
    raw, profile = _load(rc)
    lo, hi = _interval(rc, raw)
    pb = PotentialBeta(profile)
    cfg = rc.solver()
    rep = compute_conductance(pb, lo, hi, cfg, j_max=rc.j_max)
    out = {
        "schema": CONDUCTANCE_SCHEMA,
        "config": report.header(rc.command, cfg),
        "profile": profile_to_config(profile),
    }
    out.update(_conductance_dict(rep))
    _write(rc.output_dir / "conductance.json", report.dumps(out))
    if rc.emit_plots:
        from .plots import band_diagram

        k = np.linspace(*(rc.k_range or default_k_range(pb, hi)), rc.n_k)
        table = sweep_bands(pb, k, rep.j_max, cfg)
        _write(rc.output_dir / "conductance.svg", band_diagram(table, (lo, hi), title=rc.profile_path.stem))
    return 0


def cmd_perturb(rc):
    raw, profile = _load(rc)
    if "perturbation" not in raw:
        raise ConfigurationError("profile file has no 'perturbation' section")
    pert = perturbation_from_config(raw["perturbation"])
    lo, hi = _interval(rc, raw)
    cfg = rc.solver()
    pb = PotentialBeta(profile)
    g = make_switch(lo, hi)
    rep = invariance_check(pb, pert, g, cfg, tol=float(raw.get("tolerance", 1e-2)), j_max=rc.j_max)
    out = {
        "schema": "iwatsuka.perturb/1",
        "config": report.header(rc.command, cfg, profile=profile_to_config(profile),
                                perturbation=perturbation_to_config(pert)),
        "before": _conductance_dict(rep.before),
        "after": _conductance_dict(rep.after),
        "difference": rep.difference,
        "tol": rep.tol,
        "passed": rep.passed,
    }
    if profile.kind == "constant" and hi < abs(profile.b_minus):
        strip = strip_zero_check(abs(profile.b_minus), pert, g, cfg)
        out["strip"] = {"b0": strip.b0, "value": strip.value, "tol": strip.tol, "passed": strip.passed}
    if profile.b_minus > 0:
        n = rep.before.spec.n_minus
        k0 = float(raw.get("k0", DEFAULT_K0))
        spec = persistence_spec_for(pert, n, profile.b_minus, k0)
        iv = gap_persistence_interval(spec)
        out["gap_persistence"] = {"n": n, "b_field": spec.b_field, "a_norm": spec.a_norm, "k0": k0,
                                  "d_n": spec.d_n, "interval": None if iv is None else list(iv)}
    _write(rc.output_dir / "perturb.json", report.dumps(out))
    return 0 if rep.passed and out.get("strip", {}).get("passed", True) else 1


def cmd_scaling(rc, args):
    if args.shape == "sharp":
        shape = InterfaceShape("sharp")
    else:
        shape = InterfaceShape("smooth", *args.q)
    cfg = rc.solver()
    rows = scaling_table(shape, args.fields, cfg)
    head = report.header(rc.command, cfg, shape={"kind": shape.kind, "q_minus": shape.q_minus,
                                                 "q_plus": shape.q_plus})
    text = f"# {json.dumps(head, sort_keys=True)}\n" + scaling_to_csv(rows)
    _write(rc.output_dir / "scaling.csv", text)
    return 0


def cmd_verify_all(rc, args):
    cfg = rc.solver()
    examples = ExampleSet(args.examples)
    results = run_all(examples, cfg, progress=lambda r: print(r.line(), flush=True))
    doc = acceptance_report(results, cfg, examples.directory)
    _write(rc.output_dir / "acceptance.json", report.dumps(doc))
    lines = [f"{'PASS' if r.passed else 'FAIL'} {r.number} {r.name}" for r in results]
    _write(rc.output_dir / "acceptance.txt", "\n".join(lines) + "\n")
    return 0 if doc["passed"] else 1


def _error_json(exc):
    detail = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
    for attr in ("level", "side"):
        if getattr(exc, attr, None) is not None:
            detail[attr] = getattr(exc, attr)
    return json.dumps(report.clean(detail), sort_keys=True)


PAIR_OPTIONS = ("--interval", "--krange", "--q", "--fields")


def _attach_negative_values(argv):
    # argparse reads "-1,1" as an option; glue such values to their flag
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in PAIR_OPTIONS and i + 1 < len(argv) and re.match(r"-[\d.]", argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_attach_negative_values(argv))
    try:
        rc = _run_config(args)
        if rc.command == "bands":
            return cmd_bands(rc)
        if rc.command == "spectrum":
            return cmd_spectrum(rc)
        if rc.command == "conductance":
            return cmd_conductance(rc)
        if rc.command == "perturb":
            return cmd_perturb(rc)
        if rc.command == "scaling":
            return cmd_scaling(rc, args)
        return cmd_verify_all(rc, args)
    except IwatsukaError as exc:
        print(_error_json(exc), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
