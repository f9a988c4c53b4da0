"""Command-line front end.

    wedgeflow density|validate|simulate|survival|duality --config <file> [--out <dir>] [--seed N]

The config file is flat ``key = value`` text. Angles accept radians or
rational multiples of pi ("pi/3", "2pi/5", "0.3*pi") so exact integer⁠-order
geometries can be specified without decimal truncation. All outputs are
UTF-8 CSV/text with '.' decimal separator and 17 significant digits.

Exit codes are a stable contract: 0 pass, 1 validation fail,
2 not-sum-of-exponentials, 3 degenerate drift, 4 unstable drift,
5 numerical failure. Usage errors exit 64.
"""

from __future__ import annotations

import argparse
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry, density, simulate, validation
from .errors import (
    DegenerateDriftError,
    DegeneratePairError,
    DomainError,
    InvalidDensityError,
    NonIntegrableError,
    NotSumOfExponentialsError,
    NumericalBlowupError,
    UnstableDriftError,
    WedgeflowError,
)

__all__ = ["RunConfig", "parse_angle", "main"]

EXIT_OK = 0
EXIT_VALIDATION_FAILED = 1
EXIT_NOT_SUM_OF_EXPONENTIALS = 2
EXIT_DEGENERATE_DRIFT = 3
EXIT_UNSTABLE = 4
EXIT_NUMERICAL = 5
EXIT_USAGE = 64

_ANGLE_RE = re.compile(r"^\s*([0-9.eE+-]*)\s*\*?\s*pi\s*(?:/\s*([0-9.eE+-]+))?\s*$")


def parse_angle(text: str) -> float:
    """Parse an angle given in radians or as a rational multiple of pi."""
    text = text.strip()
    m = _ANGLE_RE.match(text)
    if m:
        num = float(m.group(1)) if m.group(1) not in ("", "+", "-") else float(m.group(1) + "1")
        den = float(m.group(2)) if m.group(2) else 1.0
        return num * math.pi / den
    return float(text)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


@dataclass
class RunConfig:
    """Parsed configuration: geometry, drift, and command parameters."""

    xi: float
    delta: float
    epsilon: float
    mu: tuple
    params: dict = field(default_factory=dict)

    @staticmethod
    def parse(text: str) -> "RunConfig":
        raw = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"config line without '=': {line!r}")
            key, val = line.split("=", 1)
            raw[key.strip()] = val.strip()
        try:
            xi = parse_angle(raw.pop("xi"))
            delta = parse_angle(raw.pop("delta"))
            epsilon = parse_angle(raw.pop("epsilon"))
            mu = tuple(float(v) for v in raw.pop("mu").split(","))
        except KeyError as missing:
            raise DomainError(f"config is missing required key {missing}") from None
        if len(mu) != 2 or (mu[0] == 0.0 and mu[1] == 0.0):
            raise DomainError("mu must be a nonzero 2-vector 'x,y'")
        for angle, name in ((xi, "xi"), (delta, "delta"), (epsilon, "epsilon")):
            if not (0.0 < angle < math.pi):
                raise DomainError(f"{name} must lie in (0, pi)")
        return RunConfig(xi=xi, delta=delta, epsilon=epsilon, mu=mu, params=raw)

    @staticmethod
    def load(path) -> "RunConfig":
        return RunConfig.parse(Path(path).read_text(encoding="utf-8"))

    def render(self) -> str:
        lines = [
            f"xi = {_fmt(self.xi)}",
            f"delta = {_fmt(self.delta)}",
            f"epsilon = {_fmt(self.epsilon)}",
            f"mu = {_fmt(self.mu[0])},{_fmt(self.mu[1])}",
        ]
        lines += [f"{k} = {v}" for k, v in sorted(self.params.items())]
        return "\n".join(lines) + "\n"

    # typed parameter access -------------------------------------------------
    def get_float(self, key: str, default: float) -> float:
        return float(self.params.get(key, default))

    def get_int(self, key: str, default: int) -> int:
        return int(self.params.get(key, default))

    def get_vec(self, key: str, default) -> tuple:
        if key not in self.params:
            return default
        parts = self.params[key].split(",")
        return tuple(float(p) for p in parts)

    def geometry(self) -> geometry.WedgeGeometry:
        return geometry.make_wedge(self.xi, self.delta, self.epsilon)

    def drift(self) -> geometry.Drift:
        return geometry.Drift.of(np.array(self.mu))


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def cmd_density(cfg: RunConfig, out: Path) -> int:
    g = cfg.geometry()
    d = cfg.drift()
    sum_ = density.density_expanded(g, d)
    den = density.normalize(sum_, g)
    rows = ["coeff,d_x,d_y,label_kind,label_angle"]
    for t in sum_.terms:
        rows.append(
            f"{_fmt(t.coeff)},{_fmt(t.exponent[0])},{_fmt(t.exponent[1])},"
            f"{t.label.kind},{_fmt(t.label.canonical_angle())}"
        )
    _write(out / "terms.csv", "\n".join(rows) + "\n")

    nth = cfg.get_int("grid_theta", 64)
    nr = cfg.get_int("grid_r", 64)
    rmax = cfg.get_float("grid_rmax", simulate.choose_radial_cutoff(g, d))
    lines = ["theta,r,value,normalized"]
    for theta in np.linspace(0.0, g.xi, nth):
        ct, st = math.cos(theta), math.sin(theta)
        for r in np.linspace(rmax / nr, rmax, nr):
            x = (r * ct, r * st)
            v = density.evaluate(sum_, x)
            lines.append(f"{_fmt(theta)},{_fmt(r)},{_fmt(v)},{_fmt(v * den.normalizing_constant)}")
    _write(out / "grid.csv", "\n".join(lines) + "\n")
    print(f"wrote {out / 'terms.csv'} ({len(sum_.terms)} terms) and {out / 'grid.csv'}")
    return EXIT_OK


def cmd_validate(cfg: RunConfig, out: Path) -> int:
    g = cfg.geometry()
    d = cfg.drift()
    perturb = None
    if "perturb_index" in cfg.params:
        perturb = (cfg.get_int("perturb_index", 0), cfg.get_float("perturb_rel", 0.01))
    report = validation.validate_density(
        g,
        d,
        seed=cfg.get_int("seed", 0),
        n_interior=cfg.get_int("n_interior", 200),
        n_face=cfg.get_int("n_face", 100),
        n_lambda=cfg.get_int("n_lambda", 20),
        perturb=perturb,
    )
    kv = {
        "passed": report.passed,
        "pde_residual_max": _fmt(report.pde_residual_max),
        "bc1_residual_max": _fmt(report.bc1_residual_max),
        "bc2_residual_max": _fmt(report.bc2_residual_max),
        "bar_residual_max": _fmt(report.bar_residual_max),
        "sign_change_found": report.sign_change_found,
        "corner_slope_dev": _fmt(report.corner_fit[0]),
        "corner_c_spread": _fmt(report.corner_fit[1]),
    }
    for name, tol in report.tolerances.items():
        kv[f"tol_{name}"] = _fmt(tol)
    text = ["validation report", "-----------------"]
    text += [f"{k}={v}" for k, v in kv.items()]
    _write(out / "report.txt", "\n".join(text) + "\n")
    print("\n".join(text))
    return EXIT_OK if report.passed else EXIT_VALIDATION_FAILED


def _histogram_csv(result: simulate.SimResult) -> str:
    nth, nr = result.histogram.shape
    total = result.samples
    lines = ["theta_lo,theta_hi,r_lo,r_hi,count,density_estimate"]
    te, re_ = result.theta_edges, result.r_edges
    for i in range(nth):
        dth = te[i + 1] - te[i]
        for j in range(nr):
            area = 0.5 * (re_[j + 1] ** 2 - re_[j] ** 2) * dth
            dens = result.histogram[i, j] / (total * area)
            lines.append(
                f"{_fmt(te[i])},{_fmt(te[i + 1])},{_fmt(re_[j])},{_fmt(re_[j + 1])},"
                f"{result.histogram[i, j]},{_fmt(dens)}"
            )
    return "\n".join(lines) + "\n"


def cmd_simulate(cfg: RunConfig, out: Path, seed_override: int | None) -> int:
    g = cfg.geometry()
    d = cfg.drift()
    sim_cfg = simulate.SimConfig(
        dt=cfg.get_float("dt", 1e-3),
        steps=cfg.get_int("steps", 4000),
        paths=cfg.get_int("paths", 256),
        seed=seed_override if seed_override is not None else cfg.get_int("seed", 0),
        start=cfg.get_vec("start", (0.5, 0.5)),
        burn_in=cfg.get_int("burn_in", 2000),
    )
    bins = (cfg.get_int("bins_theta", 64), cfg.get_int("bins_r", 128))
    rmax = cfg.params.get("rmax")
    backend = cfg.params.get("backend")
    result = simulate.simulate_srbm(
        g,
        d,
        sim_cfg,
        bins=bins,
        radial_cutoff=float(rmax) if rmax is not None else None,
        backend=backend,
    )
    _write(out / "histogram.csv", _histogram_csv(result))
    lines = [
        f"samples={result.samples}",
        f"visits={result.visits}",
        f"overflow={result.overflow}",
        f"vertex_projections={result.vertex_projections}",
        f"expected_l1_noise={_fmt(result.standard_error)}",
        f"backend={backend or simulate._backend.active_backend()}",
    ]
    try:
        den = density.normalize(density.density_expanded(g, d), g)
        masses = simulate.closed_form_bin_masses(den, g, result.theta_edges, result.r_edges)
        l1, l2 = simulate.histogram_distance(result, masses)
        lines += [f"l1_to_closed_form={_fmt(l1)}", f"l2_to_closed_form={_fmt(l2)}"]
    except WedgeflowError:
        lines += ["l1_to_closed_form=nan", "l2_to_closed_form=nan"]
    _write(out / "report.txt", "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def cmd_survival(cfg: RunConfig, out: Path, seed_override: int | None) -> int:
    g = cfg.geometry()
    d = cfg.drift()
    x = np.array(cfg.get_vec("x", (1.0, 1.0)))
    sim_cfg = simulate.SimConfig(
        dt=cfg.get_float("dt", 1e-3),
        steps=1,
        paths=cfg.get_int("paths", 20000),
        seed=seed_override if seed_override is not None else cfg.get_int("seed", 0),
    )
    horizon = cfg.get_float("horizon", 40.0)
    res = simulate.survival_mc(g, d, x, horizon, sim_cfg)
    lines = [
        f"estimate={_fmt(res.estimate)}",
        f"standard_error={_fmt(res.standard_error)}",
        f"estimate_half_horizon={_fmt(res.estimate_half_horizon)}",
        f"horizon_drift={_fmt(abs(res.estimate - res.estimate_half_horizon))}",
        f"safe_fraction={_fmt(res.safe_fraction)}",
    ]
    m = round(math.pi / g.xi)
    if abs(g.xi - math.pi / m) <= 1e-9 and m >= 2:
        group = simulate.DihedralGroup.of_order(m)
        closed = simulate.reflection_group_survival(group, d, x)
        lines.append(f"group_formula={_fmt(closed)}")
        lines.append(f"deviation_sigmas={_fmt(abs(res.estimate - closed) / res.standard_error)}")
    _write(out / "survival.txt", "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def cmd_duality(cfg: RunConfig, out: Path) -> int:
    g = cfg.geometry()
    d = cfg.drift()
    x = np.array(cfg.get_vec("x", (1.0, 1.0)))
    res = simulate.duality_check(g, d, x, nodes=cfg.get_int("nodes", 256))
    lines = [f"lhs={_fmt(res.lhs)}", f"rhs={_fmt(res.rhs)}", f"diff={_fmt(res.diff)}"]
    _write(out / "duality.txt", "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep exit code 2 reserved for the domain contract
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def main(argv=None) -> int:
    parser = _Parser(prog="wedgeflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("density", "validate", "simulate", "survival", "duality"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=".")
        p.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        cfg = RunConfig.load(args.config)
        out = Path(args.out)
        if args.command == "density":
            return cmd_density(cfg, out)
        if args.command == "validate":
            return cmd_validate(cfg, out)
        if args.command == "simulate":
            return cmd_simulate(cfg, out, args.seed)
        if args.command == "survival":
            return cmd_survival(cfg, out, args.seed)
        return cmd_duality(cfg, out)
    except NotSumOfExponentialsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_SUM_OF_EXPONENTIALS
    except (DegenerateDriftError, DegeneratePairError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE_DRIFT
    except UnstableDriftError as exc:
        print(f"error: no stationary distribution: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (NumericalBlowupError, InvalidDensityError, NonIntegrableError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
