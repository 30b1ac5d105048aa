"""Command-line front end: ``classify``, ``run``, ``decay`` and ``verify``.

Configuration is a flat ``key = value`` text file (``#`` starts a comment);
every key can be overridden with ``--set KEY=VALUE``.  Run outputs are a
diagnostics CSV, a binary final-state snapshot and a manifest that echoes the
full configuration, so ``run --config manifest.txt`` reproduces the CSV.

Exit codes: 0 success, 2 configuration error, 3 numerical blow-up,
4 verification failure.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import math
import struct
import sys
import time
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import tensor_core as tc
from .coefficients import (
    MaterialCoefficients,
    RegimeReport,
    classify_regime,
    gate_table,
    hessian_psd,
)
from .diagnostics import CSV_COLUMNS, DecayFit, check_eta, default_eta, fit_decay, record
from .dynamics import FlowState, InitialSpec, Model, make_initial_data
from .errors import BlowUpError, CoefficientError, ConfigError
from .spectral import Grid

log = logging.getLogger("qiansheng")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_VERIFY = 4

SNAPSHOT_MAGIC = b"QSSNAP01"
TRUNCATION_MARKER = "# TRUNCATED"


@dataclass(frozen=True)
class RunConfig:
    """All run parameters; field order is the manifest key order."""

    d: int = 2
    n: int = 64
    a: float = 1.0
    b: float = 0.5
    c: float = 1.0
    J: float = 0.5
    L: float = 1.0
    beta1: float = 0.1
    beta4: float = 2.0
    beta5: float = -0.5
    beta6: float = 0.5
    mu1: float = 1.0
    mu2: float = 1.0
    mu2_tilde: float = 1.0
    s: int = 2
    cfl: float = 0.4
    dt: float = 0.0             # 0 selects dt from the CFL rule
    t_end: float = 5.0
    eps: float = 0.0            # 0 disables the mollifier
    eta: float = 0.0            # 0 selects the default weight
    cadence: int = 10
    init: str = "random_smooth"
    energy: float = 1e-2
    seed: int = 0
    width: float = 3.0          # Gaussian width of the random spectrum
    kmax: int = 0               # 0 leaves the random spectrum unboxed
    mode: str = "1,0"
    amp_u: float = 1.0
    amp_q: float = 1.0
    amp_r: float = 1.0
    u_mean: str = ""
    fit_start: float = -1.0     # negative selects the second half of the run
    fit_end: float = -1.0
    csv: str = "diagnostics.csv"
    snapshot: str = "final_state.bin"
    manifest: str = "manifest.txt"
    inject_sign_error: bool = False

    def coefficients(self) -> MaterialCoefficients:
        return MaterialCoefficients.from_mapping(asdict(self))

    def grid(self) -> Grid:
        return Grid(self.d, self.n)

    def eta_value(self) -> float:
        return self.eta if self.eta > 0 else default_eta(self.coefficients())

    def initial_spec(self) -> InitialSpec:
        return InitialSpec(
            kind=self.init,
            energy=self.energy,
            seed=self.seed,
            decay=self.width,
            kmax=self.kmax or None,
            mode=_int_tuple(self.mode, "mode"),
            amp_u=self.amp_u,
            amp_q=self.amp_q,
            amp_r=self.amp_r,
            u_mean=_float_tuple(self.u_mean, "u_mean") or None,
        )

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def _int_tuple(text: str, key: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: expected comma-separated integers, got {text!r}") from exc


def _float_tuple(text: str, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {text!r}") from exc


def _coerce(name: str, kind, raw: str):
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind.__name__}") from exc
    return raw


_TYPES = {"int": int, "float": float, "str": str, "bool": bool}


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def build_config(values: dict[str, str]) -> RunConfig:
    known = {f.name: _TYPES[f.type] if isinstance(f.type, str) else f.type for f in fields(RunConfig)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    typed = {k: _coerce(k, known[k], v) for k, v in values.items()}
    cfg = RunConfig(**typed)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    if cfg.d not in (2, 3):
        raise ConfigError(f"d must be 2 or 3, got {cfg.d}")
    if cfg.n < 8 or cfg.n & (cfg.n - 1):
        raise ConfigError(f"n must be a power of two >= 8, got {cfg.n}")
    if cfg.s < 0:
        raise ConfigError(f"s must be >= 0, got {cfg.s}")
    if cfg.t_end < 0 or not math.isfinite(cfg.t_end):
        raise ConfigError(f"t_end must be finite and >= 0, got {cfg.t_end}")
    if cfg.dt < 0 or not 0 < cfg.cfl <= 1:
        raise ConfigError(f"need dt >= 0 and 0 < cfl <= 1, got dt={cfg.dt}, cfl={cfg.cfl}")
    if cfg.eps < 0:
        raise ConfigError(f"eps must be >= 0, got {cfg.eps}")
    if cfg.cadence < 1:
        raise ConfigError(f"cadence must be >= 1, got {cfg.cadence}")
    if cfg.init not in ("random_smooth", "single_mode", "manufactured"):
        raise ConfigError(f"unknown init kind {cfg.init!r}")
    if cfg.energy < 0:
        raise ConfigError(f"energy must be >= 0, got {cfg.energy}")
    cfg.initial_spec()
    cfg.coefficients().validate()
    if cfg.eta > 0:
        try:
            check_eta(cfg.coefficients(), cfg.eta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if cfg.s <= cfg.d / 2 + 1:
        log.warning("s=%d does not exceed d/2 + 1 = %g; the well-posedness theory "
                    "assumes it does, the run proceeds anyway", cfg.s, cfg.d / 2 + 1)


def load_config(path: str | Path | None = None, overrides=(), seed: int | None = None) -> RunConfig:
    values: dict[str, str] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values.update(parse_config_text(text))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip()] = value.strip()
    if seed is not None:
        values["seed"] = str(seed)
    return build_config(values)


# -- file formats ---------------------------------------------------------------

def format_row(values) -> str:
    """Shortest round-trip decimal for every entry."""
    return ",".join(repr(float(v)) for v in values)


def git_blob_sha1(data: bytes) -> str:
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def write_snapshot(path: Path, state: FlowState, c: MaterialCoefficients) -> None:
    """Header (magic, d, n, t, twelve coefficients) then u, Q, R as little-endian doubles."""
    g = state.grid
    coeffs = [getattr(c, name) for name in MaterialCoefficients.names()]
    header = SNAPSHOT_MAGIC + struct.pack("<iid12d", g.d, g.n, state.t, *coeffs)
    with open(path, "wb") as fh:
        fh.write(header)
        for arr in (state.u, state.q, state.r):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_snapshot(path: str | Path) -> tuple[FlowState, MaterialCoefficients]:
    data = Path(path).read_bytes()
    if not data.startswith(SNAPSHOT_MAGIC):
        raise ConfigError(f"{path} is not a snapshot file")
    off = len(SNAPSHOT_MAGIC)
    head = struct.calcsize("<iid12d")
    d, n, t, *coeffs = struct.unpack_from("<iid12d", data, off)
    off += head
    grid = Grid(d, n)
    c = MaterialCoefficients(*coeffs)
    arrays = []
    for comps in ((d,), (d, d), (d, d)):
        count = int(np.prod(comps)) * n**d
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=off)
        arrays.append(arr.reshape(comps + grid.shape).astype(float))
        off += 8 * count
    return FlowState(grid, t, *arrays), c


# -- commands -------------------------------------------------------------------

def format_report(c: MaterialCoefficients, report: RegimeReport) -> str:
    lines = [f"{'gate':<40} {'lhs':>14} {'rhs':>14}  result"]
    for name, lhs, rhs, ok in gate_table(c):
        lines.append(f"{name:<40} {lhs:>14.6g} {rhs:>14.6g}  {'pass' if ok else 'FAIL'}")
    if report.mu2_equal:
        lines.append("mu2~ = mu2: the cross term of the entropy condition vanishes (automatic pass)")
    if report.delta0 is None:
        lines.append("coercivity margins: none (strengthened condition fails)")
    else:
        lines.append(f"coercivity margins: delta0 = {report.delta0!r}, delta1 = {report.delta1!r}")
    caps = sorted(cap.value for cap in report.capabilities)
    lines.append("capabilities: " + ", ".join(caps))
    return "\n".join(lines)


def cmd_classify(cfg: RunConfig, out=None) -> RegimeReport:
    out = out or sys.stdout
    c = cfg.coefficients()
    report = classify_regime(c)
    print(format_report(c, report), file=out)
    return report


@dataclass
class RunResult:
    status: int
    csv_path: Path
    rows: list
    state: FlowState | None
    steps: int
    initial: FlowState


def _simulate(cfg: RunConfig, out_dir: Path) -> RunResult:
    c = cfg.coefficients()
    grid = cfg.grid()
    eta = cfg.eta_value()
    state = make_initial_data(cfg.initial_spec(), grid, c, cfg.eps, cfg.s)
    initial = state
    model = Model(grid, c, cfg.eps)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / cfg.csv
    rows = []
    steps = 0
    status = EXIT_OK
    t_tol = 1e-12 * max(1.0, cfg.t_end)
    with open(csv_path, "w", newline="\n") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")

        def emit(st):
            row = record(st, c, cfg.s, eta).row()
            rows.append(row)
            fh.write(format_row(row) + "\n")

        emit(state)
        dt = cfg.dt
        try:
            while state.t < cfg.t_end - t_tol:
                if steps % cfg.cadence == 0 and cfg.dt == 0:
                    dt = model.choose_dt(state, cfg.cfl)
                h = min(dt, cfg.t_end - state.t)
                state = model.step(state, h)
                steps += 1
                if steps % cfg.cadence == 0 or state.t >= cfg.t_end - t_tol:
                    emit(state)
                    if not all(math.isfinite(v) for v in rows[-1]):
                        raise BlowUpError(state.t, float("nan"), "diagnostics")
        except BlowUpError as exc:
            fh.write(f"{TRUNCATION_MARKER} blow-up in {exc.what} at t={exc.t!r} norm={exc.norm!r}\n")
            log.error("%s", exc)
            status = EXIT_BLOWUP
            state = None
    return RunResult(status, csv_path, rows, state, steps, initial)


def _write_outputs(cfg: RunConfig, out_dir: Path, result: RunResult, wall: float) -> None:
    if result.state is not None:
        write_snapshot(out_dir / cfg.snapshot, result.state, cfg.coefficients())
    sha = git_blob_sha1(result.csv_path.read_bytes())
    with open(out_dir / cfg.manifest, "w") as fh:
        fh.write(f"# qiansheng {__version__} run manifest\n")
        fh.write(cfg.to_text())
        fh.write(f"# csv_sha1 = {sha}\n")
        fh.write(f"# steps = {result.steps}\n")
        fh.write(f"# wall_clock_seconds = {wall:.3f}\n")
        fh.write(f"# status = {result.status}\n")


def cmd_run(cfg: RunConfig, out_dir: str | Path = ".") -> int:
    out_dir = Path(out_dir)
    t0 = time.perf_counter()
    result = _simulate(cfg, out_dir)
    _write_outputs(cfg, out_dir, result, time.perf_counter() - t0)
    return result.status


def check_mean_zero(state: FlowState, tol: float = 1e-12) -> None:
    mean = np.mean(state.u, axis=tuple(range(1, state.u.ndim)))
    scale = float(np.max(np.abs(state.u), initial=0.0)) + 1.0
    if np.max(np.abs(mean)) > tol * scale:
        raise ConfigError(
            f"decay on the torus requires a mean-zero initial velocity (int u_in dx = 0); "
            f"got mean {mean.tolist()}")


def cmd_decay(cfg: RunConfig, out_dir: str | Path = ".", out=None) -> tuple[int, DecayFit | None]:
    out = out or sys.stdout
    grid = cfg.grid()
    check_mean_zero(make_initial_data(cfg.initial_spec(), grid, cfg.coefficients(), cfg.eps, cfg.s))
    out_dir = Path(out_dir)
    t0 = time.perf_counter()
    result = _simulate(cfg, out_dir)
    _write_outputs(cfg, out_dir, result, time.perf_counter() - t0)
    if result.status != EXIT_OK:
        return result.status, None
    series = [(row[0], row[1]) for row in result.rows]
    window = None
    if cfg.fit_start >= 0 and cfg.fit_end > cfg.fit_start:
        window = (cfg.fit_start, cfg.fit_end)
    try:
        fit = fit_decay(series, window=window)
    except ValueError as exc:
        raise ConfigError(f"decay fit refused: {exc}") from exc
    print(f"c2 = {fit.c2!r}\nc3 = {fit.c3!r}\nr_squared = {fit.r_squared!r}\n"
          f"window = {fit.window[0]!r}..{fit.window[1]!r}\n"
          f"decay_confirmed = {fit.decay_confirmed}", file=out)
    with open(out_dir / "decay.csv", "w", newline="\n") as fh:
        fh.write("c2,c3,r_squared,t_start,t_end,degenerate\n")
        fh.write(format_row([fit.c2, fit.c3, fit.r_squared, *fit.window]) + f",{int(fit.degenerate)}\n")
    return EXIT_OK, fit


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tolerance: float
    passed: bool
    seconds: float


def run_checks(cfg: RunConfig) -> list[CheckResult]:
    """Oracle suite on tiny grids; the coefficient set comes from the config."""
    from . import oracle

    c = cfg.coefficients()
    results = []

    def timed(name, tol, fn):
        t0 = time.perf_counter()
        res = float(fn())
        results.append(CheckResult(name, res, tol, bool(res <= tol), time.perf_counter() - t0))

    def conv():
        worst = 0.0
        for seed in range(3):
            st = oracle.random_tiny_state(oracle.TinyGridSpec(2, 8, cfg.seed + seed))
            g = st.grid
            model = Model(g, c, 0.0)
            du, dq, dr = model.rhs_hat(g.forward(st.u), g.forward(st.q), g.forward(st.r))
            ref = oracle.convolution_rhs_oracle(st, c)
            for fast, slow in ((du, ref.velocity_hat), (dq, ref.q_hat), (dr, ref.r_hat)):
                box = oracle.grid_spectrum_on_box(g, fast, g.n / 3.0)
                worst = max(worst, float(np.max(np.abs(box - slow.data))))
        return worst

    def form():
        mc = oracle.mc_min_F(c, samples=20_000, seed=cfg.seed, d=cfg.d)
        psd = hessian_psd(c, 0.0, 0.0)
        return 0.0 if (mc >= -1e-12) == psd else 1.0

    def gradient():
        rng = np.random.default_rng(cfg.seed)
        worst = 0.0
        for d in (2, 3):
            for _ in range(10):
                q = tc.sym_traceless_project(rng.standard_normal((d, d)))
                fd = oracle.fd_gradient_check(lambda m: float(tc.bulk_potential(m, c)), q, 1e-6)
                exact = -tc.molecular_field(q, c)
                worst = max(worst, float(np.linalg.norm(fd - exact) / max(np.linalg.norm(exact), 1e-300)))
        return worst

    def cancellation():
        grid = Grid(2, 32)
        st = make_initial_data(InitialSpec(energy=1.0, seed=cfg.seed, kmax=5), grid, c)
        sign = -1.0 if cfg.inject_sign_error else 1.0
        res, scale = oracle.cancellation_residual(grid, st.u, st.q, c.L, sign)
        return res / scale

    def damped():
        lin = replace(c, b=0.0, c=0.0, mu2=0.0, mu2_tilde=0.0, beta5=0.0, beta6=0.0)
        grid = Grid(2, 16)
        st = make_initial_data(InitialSpec(kind="single_mode", energy=1.0, amp_u=0.0), grid, lin)
        model = Model(grid, lin)
        h = 0.01
        for _ in range(100):
            st = model.step(st, h)
        q0 = make_initial_data(InitialSpec(kind="single_mode", energy=1.0, amp_u=0.0), grid, lin)
        qh0, rh0 = grid.forward(q0.q), grid.forward(q0.r)
        qe, re = oracle.damped_mode_exact((1, 0), qh0, rh0, lin, 100 * h)
        err = max(np.max(np.abs(grid.inverse(qe) - st.q)), np.max(np.abs(grid.inverse(re) - st.r)))
        return err

    timed("convolution oracle vs fast right sides", 1e-10, conv)
    timed("Monte-Carlo F minimum vs Hessian sign", 0.0, form)
    timed("molecular field vs finite differences", 1e-6, gradient)
    timed("Ericksen/elastic cancellation identity", 1e-9, cancellation)
    timed("single-mode damped oscillator", 1e-10, damped)
    return results


def cmd_verify(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    results = run_checks(cfg)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<42} residual={r.residual:.3e} "
              f"tol={r.tolerance:.1e} ({r.seconds:.2f}s)", file=out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qiansheng", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("classify", "evaluate coefficient gates and capabilities"),
                       ("run", "simulate and write CSV, snapshot and manifest"),
                       ("decay", "simulate and fit an exponential decay rate"),
                       ("verify", "run the oracle verification suite")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config key (repeatable)")
        p.add_argument("--out", default=".", help="output directory (default: .)")
        p.add_argument("--seed", type=int, help="override the random seed")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides, args.seed)
        if args.command == "classify":
            cmd_classify(cfg)
            return EXIT_OK
        if args.command == "run":
            return cmd_run(cfg, args.out)
        if args.command == "decay":
            return cmd_decay(cfg, args.out)[0]
        return cmd_verify(cfg)
    except (ConfigError, CoefficientError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
