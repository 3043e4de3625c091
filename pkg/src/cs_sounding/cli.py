"""Command-line front end.

Four commands, all driven by a YAML/JSON config file: `simulate` (one
experiment, writes result.json and channel.csv), `sweep` (measurement
count sweep, writes sweep.csv), `overhead` (feedback-bit and airtime
comparison, writes overhead.json), and `selfcheck` (fast invariant suite).
Outputs are byte-deterministic for a given config. Exit codes: 0 ok,
2 config error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import feedback as fb
from . import numerics
from . import pipeline
from . import sounding as snd
from .config import ConfigError, load_config
from .sparse_recovery import DegenerateSupport, InsufficientMeasurements

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

CHANNEL_CSV_HEADER = "domain,index,re_true,im_true,re_rec,im_rec"
SWEEP_CSV_HEADER = "n_kappa,trial,mse,iterations,mac_count,converged"


def _fmt(x) -> str:
    """Deterministic cell formatting; floats carry 17 significant digits."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _write_text(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def _write_json(path: str, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _report_dict(report: fb.FeedbackReport) -> dict:
    return {
        "scheme": report.scheme,
        "bits_per_tone": report.bits_per_tone,
        "n_tones": report.n_tones,
        "total_bits": report.total_bits,
        "airtime_us": report.airtime_us,
    }


def _apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if getattr(args, "out", None) is not None:
        cfg = replace(cfg, output=args.out)
    if getattr(args, "algorithm", None) is not None:
        cfg = replace(cfg, recovery=replace(cfg.recovery, algorithm=args.algorithm))
    return cfg


def _load(args):
    cfg, pdp = load_config(args.config)
    return _apply_overrides(cfg, args), pdp


def cmd_simulate(args) -> int:
    try:
        cfg, pdp = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = cfg.output
    try:
        res = pipeline.run_experiment(cfg, pdp, trial=0)
    except (DegenerateSupport, InsufficientMeasurements) as exc:
        _write_json(os.path.join(outdir, "result.json"), {
            "status": f"solver_error: {exc}",
            "config": cfg.to_dict(),
        })
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    result = {
        "status": res.status,
        "config": cfg.to_dict(),
        "seeds": {
            "channel": res.seeds.channel,
            "noise": res.seeds.noise,
            "subsample": res.seeds.subsample,
            "allocation": res.seeds.allocation,
        },
        "mse": res.mse,
        "mse_freq": res.mse_freq,
        "kappa_realized": res.kappa_realized,
        "kappa_used": res.kappa_used,
        "threshold_floor": res.threshold_floor,
        "recovery": {
            "iterations": res.recovery.iterations,
            "converged": res.recovery.converged,
            "mac_count": res.recovery.mac_count,
            "support_size": int(res.recovery.support.size),
            "residual_history": [float(r) for r in res.recovery.residual_history],
        },
        "mac_model_per_iteration": res.mac_model_per_iteration,
        "overhead": {
            "conventional": _report_dict(res.overhead[0]),
            "proposed": _report_dict(res.overhead[1]),
        },
    }
    _write_json(os.path.join(outdir, "result.json"), result)

    lines = [CHANNEL_CSV_HEADER]
    for domain, true_mat, rec_mat in (
        ("delay2d", res.true_channel.h_2d, res.recovered.h_2d),
        ("freq", res.true_channel.h_freq, res.recovered.h_freq),
    ):
        t = pipeline.vectorize_rowmajor(true_mat)
        r = pipeline.vectorize_rowmajor(rec_mat)
        for i in range(t.size):
            lines.append(",".join([
                domain, str(i),
                _fmt(float(t[i].real)), _fmt(float(t[i].imag)),
                _fmt(float(r[i].real)), _fmt(float(r[i].imag)),
            ]))
    _write_text(os.path.join(outdir, "channel.csv"), "\n".join(lines) + "\n")
    print(f"simulate: mse={res.mse:.6e} iterations={res.recovery.iterations} "
          f"converged={res.recovery.converged} -> {outdir}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        cfg, pdp = _load(args)
        if not args.nkappa_list.strip():
            raise ConfigError("--nkappa-list: must give at least one value")
        try:
            nk_list = [int(tok) for tok in args.nkappa_list.split(",") if tok.strip()]
        except ValueError as exc:
            raise ConfigError(f"--nkappa-list: {exc}") from exc
        if not nk_list:
            raise ConfigError("--nkappa-list: must give at least one value")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    rows = pipeline.sweep_nkappa(cfg, nk_list, cfg.trials, pdp)
    lines = [SWEEP_CSV_HEADER]
    for row in rows:
        lines.append(",".join([
            _fmt(row["n_kappa"]), _fmt(row["trial"]), _fmt(float(row["mse"])),
            _fmt(row["iterations"]), _fmt(row["mac_count"]), _fmt(row["converged"]),
        ]))
    path = os.path.join(cfg.output, "sweep.csv")
    _write_text(path, "\n".join(lines) + "\n")
    print(f"sweep: {len(rows)} rows -> {path}")
    return EXIT_OK


def cmd_overhead(args) -> int:
    try:
        cfg, _ = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    d = cfg.dims
    conv, prop = pipeline.overhead_report(
        d.n_t, d.n_r, cfg.feedback.mode, cfg.sounding.n_kappa, d.n_dft,
        cfg.feedback.n_tones, cfg.feedback.ltf_duration_us, cfg.feedback.quant_bits,
    )
    payload = {
        "conventional": _report_dict(conv),
        "proposed": _report_dict(prop),
        "angle_bits_per_tone": {
            "n_t": d.n_t,
            "n_r": d.n_r,
            "SU": fb.bits_per_tone(d.n_t, d.n_r, "SU"),
            "MU": fb.bits_per_tone(d.n_t, d.n_r, "MU"),
        },
    }
    path = os.path.join(cfg.output, "overhead.json")
    _write_json(path, payload)
    print(f"overhead: conventional {conv.total_bits} bits / {conv.airtime_us} us, "
          f"proposed {prop.total_bits} bits / {prop.airtime_us} us -> {path}")
    return EXIT_OK


def _selfcheck_checks(corrupt_p: bool):
    def check_p_orthogonality():
        for n in (2, 4):
            p = snd.p_matrix(n).entries.copy()
            if corrupt_p:
                p[0, 0] = -p[0, 0]
            if not np.array_equal(p @ p.T, n * np.eye(n, dtype=np.int64)):
                return False
        return True

    def check_kron_consistency():
        rng = np.random.default_rng(2024)
        h = rng.standard_normal((32, 4)) + 1j * rng.standard_normal((32, 4))
        return pipeline.kron_consistency_check(h) < 1e-10

    def check_givens_roundtrip():
        rng = np.random.default_rng(7)
        a = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
        v = np.linalg.qr(a)[0]
        rec = fb.givens_reconstruct(fb.givens_decompose(v))
        phases = np.exp(1j * np.angle(np.sum(v.conj() * rec, axis=0)))
        return float(np.max(np.abs(rec - v * phases))) < 1e-9

    def check_angle_bits_table():
        expected = {
            ("SU", 2, 2): 10, ("SU", 4, 2): 50, ("SU", 8, 2): 130,
            ("SU", 16, 2): 290, ("SU", 16, 4): 540,
            ("MU", 2, 2): 16, ("MU", 4, 2): 80, ("MU", 8, 2): 208,
            ("MU", 16, 2): 464, ("MU", 16, 4): 864,
        }
        return all(fb.bits_per_tone(nt, nc, mode) == bits
                   for (mode, nt, nc), bits in expected.items())

    def check_allocation_partition():
        alloc = snd.allocate_ltf(52, 4, seed=7)
        sets = [set(alloc.tones_for(a).tolist()) for a in range(4)]
        union = set().union(*sets)
        return (all(len(s) == 13 for s in sets) and len(union) == 52
                and sum(len(s) for s in sets) == 52)

    def check_unitary_transform():
        f = numerics.dft_matrix(16)
        return float(np.max(np.abs(f.conj().T @ f - np.eye(16)))) < 1e-12

    return [
        ("p_matrix_orthogonality", check_p_orthogonality),
        ("kron_path_consistency", check_kron_consistency),
        ("givens_roundtrip", check_givens_roundtrip),
        ("angle_bits_table", check_angle_bits_table),
        ("allocation_partition", check_allocation_partition),
        ("dft_unitarity", check_unitary_transform),
    ]


def cmd_selfcheck(args) -> int:
    failures = 0
    for name, check in _selfcheck_checks(args.corrupt_p):
        try:
            ok = check()
        except Exception as exc:  # a crashed check is a failed check
            ok = False
            print(f"{name}: FAIL ({exc})")
            failures += 1
            continue
        print(f"{name}: {'ok' if ok else 'FAIL'}")
        failures += 0 if ok else 1
    return EXIT_OK if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cs-sounding",
        description="Compressed-sensing WLAN channel sounding simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="YAML/JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument("--algorithm", choices=["cosamp", "omp"], default=None,
                       help="override recovery algorithm")

    p_sim = sub.add_parser("simulate", help="run one experiment")
    add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="sweep the measurement count")
    add_common(p_sweep)
    p_sweep.add_argument("--nkappa-list", required=True,
                         help="comma-separated measurement counts, e.g. 120,160,200")
    p_sweep.set_defaults(func=cmd_sweep)

    p_over = sub.add_parser("overhead", help="feedback-bit and airtime comparison")
    add_common(p_over)
    p_over.set_defaults(func=cmd_overhead)

    p_check = sub.add_parser("selfcheck", help="run the fast invariant suite")
    p_check.add_argument("--corrupt-p", action="store_true",
                         help="debug: corrupt a mapping-matrix entry to prove "
                              "the orthogonality check can fail")
    p_check.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
