"""Command line: ``weylcalc tensors``, ``weylcalc verify`` and ``weylcalc fixtures``.

Exit codes: 0 success, 1 an identity failed, 2 bad input (spec, I/O, domain).
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .connection import frame_at
from .curvature import curvatures
from .expr import DomainError, ParseError
from .specfile import ManifoldSpec, SpecError, load_spec
from .tensor import SingularMetricError
from .verify import SamplingError, VerificationReport, run_suite

__all__ = ["main", "tensor_dump", "format_dump", "fixture_paths", "resolve_spec"]


def fixture_paths() -> dict[str, Path]:
    root = resources.files("weylcalc") / "fixtures"
    return {Path(p.name).stem: Path(str(p)) for p in sorted(root.iterdir(), key=lambda p: p.name) if p.name.endswith(".json")}


def resolve_spec(arg: str) -> ManifoldSpec:
    """Load ``arg`` as a path; a bare bundled fixture name also works."""
    path = Path(arg)
    if not path.exists():
        fx = fixture_paths()
        if arg in fx:
            path = fx[arg]
    return load_spec(path)


def _parse_point(text: str, n: int) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise SpecError("--point", f"expected comma-separated numbers, got {text!r}") from None
    if len(vals) != n:
        raise SpecError("--point", f"expected {n} coordinates, got {len(vals)}")
    return vals


# key, label, reference
_BLOCKS = (
    ("metric", "g_ij", "Eq. (1.1)"),
    ("inverse_metric", "g^ij", ""),
    ("weyl_form", "T_k", "Eq. (1.1)"),
    ("connection_form", "S_k", "Eq. (1.10)"),
    ("christoffel", "{i jk} of g", ""),
    ("weyl_connection", "Gamma^i_jk", "Eq. (1.3)"),
    ("ssnm_connection", "Gammabar^i_jk", "Eq. (1.10)"),
    ("torsion", "Tbar^i_jk", "Eq. (1.11)"),
    ("riemann", "R^h_ijk", "Eq. (1.12) with Gamma"),
    ("riemann_bar", "Rbar^h_ijk", "Eq. (1.12)"),
    ("s_tensor", "S_ij", "Eq. (1.14)"),
    ("ricci", "R_ij", "Eq. (1.16)"),
    ("ricci_bar", "Rbar_ij", "Eq. (1.16)"),
    ("scalar", "R", "Eq. (1.17)"),
    ("scalar_bar", "Rbar", "Eq. (1.17)"),
    ("conformal", "C_mijk", "Eq. (1.6)"),
    ("conformal_bar", "Cbar_mijk", "Eq. (1.18)"),
    ("concircular", "Z_mijk", "Eq. (1.7)"),
    ("concircular_bar", "Zbar_mijk", "Eq. (2.7)"),
    ("projective", "W_mijk", "Eq. (1.19) with S = 0"),
    ("projective_bar", "Wbar_mijk", "Eq. (1.19)"),
    ("H_bar", "Hbar_ij", "Eq. (1.19)"),
    ("K", "K_ij as printed", "Sec. 1, Wbar - W relation"),
    ("K_trace_sign", "K_ij = nS_ij + S_ji - (n+1)S g_ij", "Sec. 1, Wbar - W relation"),
)


def tensor_dump(spec: ManifoldSpec, point: Sequence[float]) -> dict[str, Any]:
    """Every tensor of the engine at ``point`` as nested lists (0-based indices)."""
    fr = frame_at(spec.manifold, point)
    cv = curvatures(fr)
    n = fr.n
    values: dict[str, Any] = {
        "metric": fr.g,
        "inverse_metric": fr.g_inv,
        "weyl_form": fr.T,
        "connection_form": fr.S,
        "christoffel": fr.gamma_lc,
        "weyl_connection": fr.gamma,
        "ssnm_connection": fr.gamma_bar,
        "torsion": fr.gamma_bar - np.swapaxes(fr.gamma_bar, 1, 2),
        "riemann": cv.sym.R_up,
        "riemann_bar": cv.bar.R_up,
        "s_tensor": cv.S_ij,
        "ricci": cv.sym.ricci,
        "ricci_bar": cv.bar.ricci,
        "scalar": cv.sym.scalar,
        "scalar_bar": cv.bar.scalar,
        "conformal": cv.sym.conformal,
        "conformal_bar": cv.bar.conformal,
        "concircular": cv.sym.concircular_low,
        "concircular_bar": cv.bar.concircular_low,
        "projective": cv.sym.projective,
        "projective_bar": cv.bar.projective,
        "H_bar": cv.H_bar,
        "K": cv.K,
        "K_trace_sign": cv.K - 2 * (n + 1) * cv.S_trace * fr.g,
    }
    blocks = []
    for key, label, ref in _BLOCKS:
        v = values[key]
        block: dict[str, Any] = {"name": key, "label": label, "ref": ref}
        if v is None:
            block["value"] = None
            block["note"] = f"undefined for n={n} (Eq. (1.6) requires n - 2 != 0)"
        else:
            block["value"] = np.asarray(v, dtype=float).tolist()
        blocks.append(block)
    return {"spec_name": spec.name, "point": list(map(float, point)), "blocks": blocks}


def format_dump(dump: dict[str, Any]) -> str:
    """Text rendering; components are listed with 1-based indices, zeros omitted."""
    lines = [f"{dump['spec_name']} at {tuple(dump['point'])}"]
    for b in dump["blocks"]:
        head = f"{b['label']}" + (f"  [{b['ref']}]" if b["ref"] else "")
        lines.append("")
        lines.append(head)
        v = b["value"]
        if v is None:
            lines.append(f"  {b['note']}")
            continue
        arr = np.asarray(v)
        if arr.ndim == 0:
            lines.append(f"  {float(arr)!r}")
            continue
        nz = [(idx, float(arr[idx])) for idx in np.ndindex(arr.shape) if arr[idx] != 0.0]
        if not nz:
            lines.append("  all components zero")
        for idx, val in nz:
            lines.append(f"  [{','.join(str(i + 1) for i in idx)}] = {val!r}")
    return "\n".join(lines)


def _parse_fault(text: str, n: int) -> tuple[tuple[int, int, int], float]:
    comp, _, delta = text.partition(":")
    try:
        idx = tuple(int(v) for v in comp.split(","))
        d = float(delta) if delta else 1e-3
    except ValueError:
        raise SpecError("--inject-fault", f"expected i,j,k[:delta], got {text!r}") from None
    if len(idx) != 3 or not all(0 <= i < n for i in idx):
        raise SpecError("--inject-fault", f"need three indices in 0..{n - 1}, got {comp!r}")
    return idx, d  # type: ignore[return-value]


def _cmd_tensors(args) -> int:
    spec = resolve_spec(args.spec)
    point = _parse_point(args.point, spec.dimension)
    if any(not lo <= x <= hi for x, (lo, hi) in zip(point, spec.box)):
        print(f"warning: point {point} lies outside the sampling box {list(spec.box)}", file=sys.stderr)
    dump = tensor_dump(spec, point)
    if args.format == "json":
        sys.stdout.write(json.dumps(dump, indent=2, allow_nan=False) + "\n")
    else:
        print(format_dump(dump))
    return 0


def _cmd_verify(args) -> int:
    spec = resolve_spec(args.spec)
    m = spec.manifold
    if args.inject_fault:
        comp, delta = _parse_fault(args.inject_fault, spec.dimension)
        m = m.with_fault(comp, delta)
    cfg = spec.suite_config(points=args.points, seed=args.seed, tol=args.tol, gap=args.gap)
    report: VerificationReport = run_suite(m, cfg)
    text = report.to_json()
    summary_stream = sys.stdout
    if args.out == "-":
        sys.stdout.write(text)
        summary_stream = sys.stderr
    elif args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(report.summary(), file=summary_stream)
    return 0 if report.passed else 1


def _cmd_fixtures(args) -> int:
    for name, path in fixture_paths().items():
        if args.action == "path":
            if name == args.name:
                print(path)
                return 0
            continue
        data = json.loads(path.read_text(encoding="utf-8"))
        print(f"{name:16s} n={data['dimension']}  {data.get('description', '')}")
    if args.action == "path":
        print(f"error: no bundled fixture named {args.name!r}", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="weylcalc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("tensors", help="print every tensor at a point")
    t.add_argument("spec", help="spec file or bundled fixture name")
    t.add_argument("--point", required=True, help="comma-separated coordinates")
    t.add_argument("--format", choices=("text", "json"), default="text")
    t.set_defaults(func=_cmd_tensors)

    v = sub.add_parser("verify", help="run the identity suite")
    v.add_argument("spec", help="spec file or bundled fixture name")
    v.add_argument("--points", type=int)
    v.add_argument("--seed", type=int)
    v.add_argument("--tol", type=float)
    v.add_argument("--gap", type=float)
    v.add_argument("--out", help="write the JSON report here ('-' for stdout)")
    v.add_argument("--inject-fault", metavar="I,J,K[:DELTA]", help="shift Gammabar^I_JK by DELTA (default 1e-3)")
    v.set_defaults(func=_cmd_verify)

    f = sub.add_parser("fixtures", help="bundled fixtures")
    fsub = f.add_subparsers(dest="action", required=True)
    fsub.add_parser("list")
    fp = fsub.add_parser("path")
    fp.add_argument("name")
    f.set_defaults(func=_cmd_fixtures)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (SpecError, ParseError, DomainError, SingularMetricError, SamplingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
