"""Command line driver: long runs, resume, prediction, orderings, checks.

Exit codes: 0 success, 2 configuration error, 3 blow-up detected,
4 numerical non-convergence (prediction solve or verification suite).
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from .arakawa import SCHEMES, State, build_template, eval_direct, eval_componentwise
from .config import ConfigError, RunConfig, config_hash, parse_config, render_config
from .diagnostics import (
    AveragingAccumulator,
    DiagnosticsRecord,
    KahanSum,
    diagnostics_row,
    estimate_mu,
    format_float,
    invariants,
    write_diag_header,
)
from .grid import build_grid, build_operators, to_flat, to_grid
from .ordering import (
    ShearOrdering,
    bw_order,
    commutation_weights,
    mincom_order,
    plain_order,
    read_ordering,
    write_ordering,
)
from .prediction import (
    DEFAULT_PREDICTION_SIZES,
    NonConvergenceError,
    format_prediction_table,
    generate_initial,
    prediction_table,
    topography,
)
from .stepping import Stepper, jacobian_determinant, state_exploded

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_NOCONV = 4

_SUMMARY_TIMES = (1.0e4, 1.0e5, 1.0e6)
_MARK_COLUMNS = "T,mu,relE,relZ,absC,absM3"
_DENSE_OPERATOR_LIMIT = 32  # dense operators beyond this are disallowed


def _fail(msg: str, code: int) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _ordering_for(cfg: RunConfig) -> ShearOrdering:
    if cfg.ordering_tag == "Plain":
        return plain_order(cfg.N)
    if cfg.ordering_tag == "BW":
        return bw_order(cfg.N)
    ops = build_operators(build_grid(cfg.N))
    weights = commutation_weights(build_template("JEZ", ops))
    return mincom_order(weights, cfg.i1 - 1)


def _ordering_file(cfg: RunConfig, out: Path) -> Path:
    return out / f"ordering_N{cfg.N}_{cfg.ordering_tag}_i{cfg.i1}.txt"


def _load_or_compute_ordering(cfg: RunConfig, out: Path) -> ShearOrdering:
    path = _ordering_file(cfg, out)
    if path.exists():
        n, ordv = read_ordering(path)
        if n == cfg.N and ordv.tag == cfg.ordering_tag:
            return ordv
    ordv = _ordering_for(cfg)
    write_ordering(path, ordv, cfg.N)
    return ordv


def _write_checkpoint(path: Path, cfg_hash: str, k: int, ref, acc, q: np.ndarray):
    """Full restart state: q, accumulator sums, and the t=0 reference."""
    N = q.shape[0]
    sq, cq = acc.sum_q.state()
    sp, cp = acc.sum_psi.state()
    cols = [to_flat(a) for a in (q, sq, cq, sp, cp)]
    with open(path, "w") as fh:
        fh.write(
            f"# checkpoint hash={cfg_hash} step={k} acc_k0={acc.k0} acc_k={acc.k}"
            f" E0={format_float(ref.E)} Z0={format_float(ref.Z)}"
            f" C0={format_float(ref.C)} M30={format_float(ref.M3)}\n"
        )
        fh.write("idx,q,sum_q,comp_q,sum_psi,comp_psi\n")
        for idx in range(N * N):
            fh.write(
                str(idx)
                + ","
                + ",".join(format_float(col[idx]) for col in cols)
                + "\n"
            )


def _read_checkpoint(path: Path):
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# checkpoint"):
            raise ConfigError(f"{path} is not a checkpoint file")
        meta = dict(tok.split("=", 1) for tok in header.split() if "=" in tok)
        fh.readline()
        rows = [line.split(",") for line in fh if line.strip()]
    M = len(rows)
    data = np.empty((M, 5))
    for row in rows:
        data[int(row[0])] = [float(v) for v in row[1:6]]
    ref = DiagnosticsRecord(
        t=0.0,
        E=float(meta["E0"]),
        Z=float(meta["Z0"]),
        C=float(meta["C0"]),
        M3=float(meta["M30"]),
    )
    return {
        "hash": meta["hash"],
        "step": int(meta["step"]),
        "acc_k0": int(meta["acc_k0"]),
        "acc_k": int(meta["acc_k"]),
        "ref": ref,
        "columns": data,
    }


def _restore_accumulator(ck: dict, N: int) -> AveragingAccumulator:
    acc = AveragingAccumulator((N, N), ck["acc_k0"])
    acc.k = ck["acc_k"]

    def grid(col):
        return np.ascontiguousarray(to_grid(ck["columns"][:, col], N))

    acc.sum_q = KahanSum.from_state(grid(1), grid(2))
    acc.sum_psi = KahanSum.from_state(grid(3), grid(4))
    return acc


def _truncate_timeseries(path: Path, t_keep: float, column: int = 0) -> None:
    """Drop rows beyond t_keep so an appended continuation matches a
    straight run byte for byte."""
    if not path.exists():
        return
    kept = []
    with open(path) as fh:
        for line in fh:
            s = line.strip()
            if not s or s.startswith("#") or not s[0].isdigit() and s[0] != "-":
                kept.append(line)
                continue
            if float(s.split(",")[column]) <= t_keep:
                kept.append(line)
    with open(path, "w") as fh:
        fh.writelines(kept)


def _current_mu(acc) -> float | None:
    return estimate_mu(acc) if acc.count >= 1 else None


def _simulate(cfg: RunConfig, state: State, k_start: int, acc, ref, out: Path) -> int:
    """Advance from step k_start, appending artifacts. Returns exit code."""
    tau = cfg.tau
    K_end = int(round(cfg.T_end / tau))
    K0 = int(round(cfg.T0 / tau))
    k_stop = K_end if cfg.max_steps is None else min(K_end, k_start + cfg.max_steps)
    chash = config_hash(cfg)

    template = build_template(cfg.scheme, build_operators(build_grid(cfg.N)))
    ordering = _load_or_compute_ordering(cfg, out)
    stepper = Stepper(template, ordering, tau, cfg.order)

    diag_path = out / "diagnostics.csv"
    marks_path = out / "marks.csv"
    if k_start == 0:
        with open(diag_path, "w") as fh:
            fh.write(f"# generator=numpy.default_rng(PCG64) seed={cfg.seed}\n")
            write_diag_header(fh)
            fh.write(diagnostics_row(ref, ref) + "\n")
        with open(marks_path, "w") as fh:
            fh.write(_MARK_COLUMNS + "\n")

    blowup_at = None
    with open(diag_path, "a") as diag, open(marks_path, "a") as marks:
        for k in range(k_start + 1, k_stop + 1):
            stepper.step(state)
            t = k * tau
            if state_exploded(state.q):
                blowup_at = t
                with np.errstate(all="ignore"):
                    rec = invariants(state, t, _current_mu(acc))
                diag.write(diagnostics_row(rec, ref) + "\n")
                diag.write(f"# blowup t={format_float(t)}\n")
                break
            if k > K0:
                acc.add(state, k)
            if k % cfg.diag_every == 0:
                rec = invariants(state, t, _current_mu(acc))
                diag.write(diagnostics_row(rec, ref) + "\n")
            for mark in _SUMMARY_TIMES:
                if (k - 1) * tau < mark <= t and acc.count >= 1:
                    rec = invariants(state, t, _current_mu(acc))
                    marks.write(
                        ",".join(
                            format_float(v)
                            for v in (
                                mark,
                                rec.mu_hat,
                                (rec.E - ref.E) / ref.E,
                                (rec.Z - ref.Z) / ref.Z,
                                abs(rec.C - ref.C),
                                abs(rec.M3 - ref.M3),
                            )
                        )
                        + "\n"
                    )
            if k % cfg.checkpoint_every == 0:
                _write_checkpoint(out / f"state_{k}.csv", chash, k, ref, acc, state.q)

    k_last = k if (k_start < k_stop) else k_start
    _write_checkpoint(out / f"state_{k_last}.csv", chash, k_last, ref, acc, state.q)

    if blowup_at is not None:
        _write_summary(cfg, out, ref, acc, state, blowup_at, blowup=True)
        return EXIT_BLOWUP
    if k_last >= K_end:
        _write_summary(cfg, out, ref, acc, state, k_last * tau, blowup=False)
    return EXIT_OK


def _write_summary(cfg, out: Path, ref, acc, state, t_final, blowup: bool) -> None:
    lines = [
        "# run summary",
        f"# config {config_hash(cfg)}",
        f"# N={cfg.N} scheme={cfg.scheme} ordering={cfg.ordering_tag}"
        f" order={cfg.order} tau={cfg.tau:g} seed={cfg.seed}",
    ]
    if blowup:
        lines.append(f"# BLOWUP at t={t_final:g}; statistics below are partial")
    lines.append("T mu relE relZ absC absM3")
    t_marked = None
    marks_path = out / "marks.csv"
    if marks_path.exists():
        with open(marks_path) as fh:
            fh.readline()
            for line in fh:
                T, mu, rel_e, rel_z, abs_c, abs_m3 = (float(v) for v in line.split(","))
                t_marked = T
                lines.append(
                    f"{T:g} {mu:.4f} {rel_e:.3e} {rel_z:.3e} {abs_c:.3e} {abs_m3:.3e}"
                )
    if acc.count >= 1 and not blowup and t_marked != t_final:
        with np.errstate(all="ignore"):
            rec = invariants(state, t_final, _current_mu(acc))
        lines.append(
            f"{t_final:g} {rec.mu_hat:.4f} {(rec.E - ref.E) / ref.E:.3e}"
            f" {(rec.Z - ref.Z) / ref.Z:.3e} {abs(rec.C - ref.C):.3e}"
            f" {abs(rec.M3 - ref.M3):.3e}"
        )
    (out / "summary.txt").write_text("\n".join(lines) + "\n")


def cmd_run(args) -> int:
    try:
        cfg = parse_config(args.config, args.set or ())
    except ConfigError as exc:
        return _fail(str(exc), EXIT_CONFIG)
    if cfg.N > _DENSE_OPERATOR_LIMIT:
        return _fail(
            f"simulation requires dense operators; N is limited to"
            f" {_DENSE_OPERATOR_LIMIT}",
            EXIT_CONFIG,
        )
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config_resolved.txt").write_text(render_config(cfg))

    grid = build_grid(cfg.N)
    h = topography(grid)
    try:
        state = generate_initial(
            grid, h, cfg.E_target, cfg.Z_target, seed=cfg.seed
        )
    except NonConvergenceError as exc:
        return _fail(str(exc), EXIT_NOCONV)
    ref = invariants(state, 0.0)
    acc = AveragingAccumulator((cfg.N, cfg.N), int(round(cfg.T0 / cfg.tau)))
    return _simulate(cfg, state, 0, acc, ref, out)


def cmd_resume(args) -> int:
    ckpt = Path(args.checkpoint)
    if not ckpt.exists():
        return _fail(f"checkpoint not found: {ckpt}", EXIT_CONFIG)
    cfg_path = args.config or str(ckpt.parent / "config_resolved.txt")
    try:
        cfg = parse_config(cfg_path, args.set or ())
        ck = _read_checkpoint(ckpt)
    except ConfigError as exc:
        return _fail(str(exc), EXIT_CONFIG)
    if config_hash(cfg) != ck["hash"]:
        return _fail(
            "config hash mismatch: checkpoint belongs to a different trajectory",
            EXIT_CONFIG,
        )
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    k = ck["step"]
    t_keep = k * cfg.tau
    _truncate_timeseries(out / "diagnostics.csv", t_keep + 0.25 * cfg.tau)
    _truncate_timeseries(out / "marks.csv", t_keep + 0.25 * cfg.tau)
    state = State(q=to_grid(ck["columns"][:, 0], cfg.N), h=topography(build_grid(cfg.N)))
    acc = _restore_accumulator(ck, cfg.N)
    return _simulate(cfg, state, k, acc, ck["ref"], out)


def cmd_predict(args) -> int:
    try:
        sizes = tuple(int(s) for s in args.sizes.split(","))
    except ValueError:
        return _fail(f"bad sizes list: {args.sizes!r}", EXIT_CONFIG)
    try:
        rows = prediction_table(sizes, args.energy, args.enstrophy)
    except NonConvergenceError as exc:
        return _fail(str(exc), EXIT_NOCONV)
    except ValueError as exc:
        return _fail(str(exc), EXIT_CONFIG)
    text = format_prediction_table(rows)
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_order(args) -> int:
    if args.N > _DENSE_OPERATOR_LIMIT and args.tag == "MinCom":
        return _fail(
            f"MinCom weights need dense operators; N limited to"
            f" {_DENSE_OPERATOR_LIMIT}",
            EXIT_CONFIG,
        )
    try:
        cfg = RunConfig(
            N=args.N, ordering_tag=args.tag, i1=args.i1, output_dir="unused"
        ).validate()
    except ConfigError as exc:
        return _fail(str(exc), EXIT_CONFIG)
    ordv = _ordering_for(cfg)
    write_ordering(args.out, ordv, args.N)
    print(f"wrote {args.out}")
    return EXIT_OK


def _verify_checks():
    """Quick invariant suite on small grids; yields (name, ok, detail)."""
    rng = np.random.default_rng(7)

    grid6 = build_grid(6)
    ops6 = build_operators(grid6)
    yield (
        "difference operators antisymmetric",
        np.max(np.abs(ops6.dx + ops6.dx.T)) == 0.0
        and np.max(np.abs(ops6.dy + ops6.dy.T)) == 0.0,
        "",
    )
    v = rng.standard_normal(36)
    resid = ops6.lap @ (ops6.lap_pinv @ v) - (v - v.mean())
    yield ("pseudo-inverse projection identity", np.max(np.abs(resid)) < 1e-10, "")

    h6 = topography(grid6)
    worst = 0.0
    for scheme in SCHEMES:
        template = build_template(scheme, ops6)
        for _ in range(3):
            st = State(q=rng.standard_normal((6, 6)), h=h6)
            gap = np.max(
                np.abs(eval_componentwise(template, st) - eval_direct(scheme, st))
            )
            worst = max(worst, gap)
    yield ("componentwise matches direct evaluation", worst < 1e-12, f"max gap {worst:.2e}")

    grid4 = build_grid(4)
    ops4 = build_operators(grid4)
    template4 = build_template("JEZ", ops4)
    st4 = State(q=rng.standard_normal((4, 4)), h=topography(grid4))
    weights4 = commutation_weights(build_template("JEZ", ops4))
    stepper4 = Stepper(template4, mincom_order(weights4, 0), 0.1, 2)
    det = jacobian_determinant(stepper4, st4)
    yield ("volume preserved (step Jacobian)", abs(det - 1.0) < 1e-6, f"det={det:.8f}")

    st6 = State(q=rng.standard_normal((6, 6)), h=h6)
    q_before = st6.q.copy()
    stepper6 = Stepper(build_template("JEZ", ops6), plain_order(6), 0.1, 2)
    for _ in range(20):
        stepper6.step(st6)
    for _ in range(20):
        stepper6.step(st6, direction=-1)
    rev = np.max(np.abs(st6.q - q_before)) / np.max(np.abs(q_before))
    yield ("time reversal returns the state", rev < 1e-9, f"relative gap {rev:.2e}")


def cmd_verify(_args) -> int:
    failures = 0
    for name, ok, detail in _verify_checks():
        tag = "PASS" if ok else "FAIL"
        suffix = f" ({detail})" if detail and not ok else ""
        print(f"{tag} {name}{suffix}")
        failures += 0 if ok else 1
    return EXIT_OK if failures == 0 else EXIT_NOCONV


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qgshear",
        description="Volume-preserving shear-splitting runs for the "
        "barotropic vorticity equation, with statistical diagnostics.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a trajectory from a fresh initial condition")
    run.add_argument("--config", help="flat key = value config file")
    run.add_argument(
        "--set", action="append", metavar="KEY=VALUE", help="override a config key"
    )
    run.set_defaults(func=cmd_run)

    res = sub.add_parser("resume", help="continue a run from a checkpoint")
    res.add_argument("checkpoint", help="path to a state_<step>.csv file")
    res.add_argument("--config", help="config file (default: alongside checkpoint)")
    res.add_argument("--set", action="append", metavar="KEY=VALUE")
    res.set_defaults(func=cmd_resume)

    pre = sub.add_parser("predict", help="print mean-field mu predictions")
    pre.add_argument(
        "--sizes", default=",".join(str(n) for n in DEFAULT_PREDICTION_SIZES)
    )
    pre.add_argument("--energy", type=float, default=7.0)
    pre.add_argument("--enstrophy", type=float, default=20.0)
    pre.add_argument("--out", help="also write the table to this file")
    pre.set_defaults(func=cmd_predict)

    orc = sub.add_parser("order", help="compute and write an ordering file")
    orc.add_argument("--N", type=int, required=True)
    orc.add_argument("--tag", default="MinCom", choices=("Plain", "BW", "MinCom"))
    orc.add_argument("--i1", type=int, default=1, help="1-based start variable")
    orc.add_argument("--out", required=True)
    orc.set_defaults(func=cmd_order)

    ver = sub.add_parser("verify", help="run the quick invariant suite")
    ver.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
