"""Batch front-end: metric sweeps, rate regions and the validation suite.

Exit codes: 0 success, 1 validation or containment failure (or a solver
error), 2 usage or configuration error.
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
from typing import Optional

import numpy as np

from . import __version__
from . import downlink as dl
from . import uplink as ul
from .channels import correlation_model, sample_hbar, sensing_channel
from .config import ConfigError, ScenarioFile, load, with_snr
from .exceptions import DomainError, HoloIsacError
from .montecarlo import run_blocks, stream_id
from .region import (RateRegion, check_containment, downlink_region_icsi, downlink_region_scsi,
                     draw_scalars, fdsac_region, scenario_hash, uplink_region)
from .special import SpectralStats
from .validation import Scenario, evaluate, registry, run_validation

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# --------------------------------------------------------------- sweep table
# (link, metric, design, csi) -> (closed form, high-SNR form, oracle name)


def _ul_ecr_hi(s):
    p = s.params
    return math.log2(p.p_c / p.sigma2_u) + SpectralStats(s.model.eigs).upsilon()


def _ul_cc_op_hi(s):
    p = s.params
    return math.exp(ul.expsum_log_op_asymptote(s.model.eigs, dl._outage_threshold(p.r0),
                                               p.p_c / p.sigma2_u))


def _lam1(s):
    return dl.scsi_cc_beamformer(s.model)[2]


SWEEPS: dict = {}


def _reg(link, metric, design, csis, closed, hi, oracle=None):
    for csi in csis:
        name = oracle(csi) if callable(oracle) else oracle
        SWEEPS[(link, metric, design, csi)] = (closed, hi, name)


BOTH = ("icsi", "scsi")
_reg("downlink", "sr", "sc", BOTH, lambda s: dl.sc_sr_closed(s.params, s.cfg),
     lambda s: dl.sc_sr_highsnr(s.params, s.cfg), "dl_sc_sr")
_reg("downlink", "sr", "cc", ("icsi",), lambda s: dl.cc_avg_sr(s.params, s.model, s.hs),
     lambda s: dl.cc_avg_sr_highsnr(s.params, s.cfg, s.model, s.hs), "dl_cc_avg_sr")
_reg("downlink", "sr", "cc", ("scsi",), lambda s: dl.scsi_cc_sr(s.params, s.model, s.hs, s.cfg),
     lambda s: dl.scsi_cc_sr_highsnr(s.params, s.model, s.hs, s.cfg), "dl_scsi_cc_sr")
_reg("downlink", "ecr", "sc", BOTH, lambda s: dl.sc_ecr(s.params, s.model, s.hs),
     lambda s: dl.sc_ecr_highsnr(s.params, s.model, s.hs), "dl_sc_ecr")
_reg("downlink", "ecr", "cc", ("icsi",), lambda s: dl.cc_ecr(s.params, s.model.eigs),
     lambda s: dl.cc_ecr_highsnr(s.params, s.model.eigs), "dl_cc_ecr")
_reg("downlink", "ecr", "cc", ("scsi",), lambda s: dl.scsi_cc_ecr(s.params, _lam1(s)),
     lambda s: dl.scsi_cc_ecr_highsnr(s.params, _lam1(s)), "dl_scsi_cc_ecr")
_reg("downlink", "op", "sc", BOTH, lambda s: dl.sc_op(s.params, s.model, s.hs),
     lambda s: dl.sc_op_asymptote(s.params, s.model, s.hs), "dl_sc_op")
_reg("downlink", "op", "cc", ("icsi",), lambda s: dl.cc_op(s.params, s.model.eigs),
     lambda s: dl.cc_op_asymptote(s.params, s.model.eigs), "dl_cc_op")
_reg("downlink", "op", "cc", ("scsi",), lambda s: dl.scsi_cc_op(s.params, _lam1(s)),
     lambda s: dl.scsi_cc_op_asymptote(s.params, _lam1(s)), "dl_scsi_cc_op")
for _csi in BOTH:
    _reg("downlink", "sr", "fdsac", (_csi,),
         lambda s, c=_csi: dl.fdsac_downlink(s.params, s.hs, c, s.model)[0],
         lambda s, c=_csi: dl.fdsac_downlink_highsnr(s.params, s.hs, c, s.model)[0])
    _reg("downlink", "ecr", "fdsac", (_csi,),
         lambda s, c=_csi: dl.fdsac_downlink(s.params, s.hs, c, s.model)[1],
         lambda s, c=_csi: dl.fdsac_downlink_highsnr(s.params, s.hs, c, s.model)[1],
         f"dl_fdsac_{_csi}_cr")
    _reg("uplink", "sr", "fdsac", (_csi,),
         lambda s, c=_csi: ul.fdsac_uplink(s.model, s.hs, s.params, c)[0],
         lambda s, c=_csi: ul.fdsac_uplink_highsnr(s.model, s.hs, s.params, c)[0])
    _reg("uplink", "ecr", "fdsac", (_csi,),
         lambda s, c=_csi: ul.fdsac_uplink(s.model, s.hs, s.params, c)[1],
         lambda s, c=_csi: ul.fdsac_uplink_highsnr(s.model, s.hs, s.params, c)[1],
         f"ul_fdsac_{_csi}_cr")
_reg("uplink", "sr", "sc", BOTH, lambda s: ul.sc_sic_sr(s.params, s.cfg),
     lambda s: ul.sc_sic_sr_highsnr(s.params, s.cfg), "ul_sc_sic_sr")
_reg("uplink", "sr", "cc", ("icsi",), lambda s: ul.cc_sic_avg_sr(s.model, s.hs, s.params),
     lambda s: ul.cc_sic_avg_sr_highsnr(s.model, s.hs, s.params), "ul_cc_sic_avg_sr")
_reg("uplink", "sr", "cc", ("scsi",), lambda s: ul.scsi_cc_sic_sr(s.model, s.hs, s.params),
     lambda s: ul.scsi_cc_sic_sr_highsnr(s.model, s.hs, s.params), "ul_scsi_cc_sic_sr")
_reg("uplink", "ecr", "sc", ("icsi",), lambda s: ul.sc_sic_ecr(s.model, s.hs, s.params),
     lambda s: ul.sc_sic_ecr_highsnr(s.model, s.hs, s.params), "ul_sc_sic_ecr")
_reg("uplink", "ecr", "sc", ("scsi",),
     lambda s: ul.scsi_sc_comm(ul.scsi_detection_vector(s.model, s.hs, s.params)[1], s.params)[0],
     lambda s: ul.scsi_sc_comm_highsnr(ul.scsi_detection_vector(s.model, s.hs, s.params)[1],
                                       s.params)[0], "ul_scsi_sc_sic_ecr")
_reg("uplink", "ecr", "cc", ("icsi",), lambda s: ul.cc_sic_comm(s.model, s.params)[0],
     _ul_ecr_hi, "ul_cc_sic_ecr")
_reg("uplink", "ecr", "cc", ("scsi",), lambda s: ul.scsi_cc_sic_comm(s.model, s.params)[0],
     lambda s: ul.scsi_sc_comm_highsnr(_lam1(s), s.params)[0], "ul_scsi_cc_sic_ecr")
_reg("uplink", "op", "sc", ("icsi",), lambda s: ul.sc_sic_op(s.model, s.hs, s.params),
     lambda s: ul.sc_sic_op_asymptote(s.model, s.hs, s.params), "ul_sc_sic_op")
_reg("uplink", "op", "sc", ("scsi",),
     lambda s: ul.scsi_sc_comm(ul.scsi_detection_vector(s.model, s.hs, s.params)[1], s.params)[1],
     lambda s: ul.scsi_sc_comm_highsnr(ul.scsi_detection_vector(s.model, s.hs, s.params)[1],
                                       s.params)[1], "ul_scsi_sc_sic_op")
_reg("uplink", "op", "cc", ("icsi",), lambda s: ul.cc_sic_comm(s.model, s.params)[1],
     _ul_cc_op_hi, "ul_cc_sic_op")
_reg("uplink", "op", "cc", ("scsi",), lambda s: ul.scsi_cc_sic_comm(s.model, s.params)[1],
     lambda s: ul.scsi_sc_comm_highsnr(_lam1(s), s.params)[1], "ul_scsi_cc_sic_op")


def valid_sweeps() -> list:
    out = sorted(SWEEPS) + [("downlink", m, "pareto", c) for m in ("sr", "ecr") for c in BOTH]
    return sorted(out)


def _prepare(sf: ScenarioFile):
    return correlation_model(sf.array, sf.params), sensing_channel(sf.array, sf.params)


def _pareto_row(sc: Scenario, sf: ScenarioFile, metric: str, csi: str, tau: float):
    if csi == "icsi":
        def draw(rng, n):
            ds = draw_scalars(sc.model, sc.hs, sc.params, sample_hbar(sc.model, rng, n))
            res = dl.pareto_solve(tau, ds.n1, ds.n2, ds.rho, sc.params.frame_len)
            return res.sr if metric == "sr" else res.cr
        x = run_blocks(draw, sf.mc, f"sweep-pareto-{metric}")
        return math.nan, math.nan, float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))
    rng = np.random.Generator(np.random.Philox(key=[sf.mc.seed, stream_id("sweep-sdr")]))
    reg = downlink_region_scsi(sc.model, sc.hs, sc.params, [tau], sf.grids.sdr_draws, rng)
    pt = reg.points[0]
    return (pt.sr if metric == "sr" else pt.cr), math.nan, math.nan, math.nan


def cmd_sweep(sf: ScenarioFile, link: str, metric: str, design: str, csi: str,
              tau: Optional[float] = None, with_mc: bool = True, model=None, hs=None) -> list:
    """Rows of (snr_db, closed_form, high_snr_approx, mc_mean, mc_se)."""
    key = (link, metric, design, csi)
    if key not in valid_sweeps():
        raise UsageError("invalid sweep; valid (link, metric, design, csi) tuples:\n  "
                         + "\n  ".join(" ".join(k) for k in valid_sweeps()))
    if design == "pareto" and tau is None:
        raise UsageError("design 'pareto' requires --tau")
    if model is None:
        model, hs = _prepare(sf)
    rows = []
    for snr in sf.grids.snr_db:
        p = with_snr(sf.params, snr, link)
        sc = Scenario(sf.array, p, model, hs, model)
        if design == "pareto":
            cf, hi, m, se = _pareto_row(sc, sf, metric, csi, float(tau))
        else:
            closed, high, oracle = SWEEPS[key]
            cf, hi = closed(sc), high(sc)
            m = se = math.nan
            if with_mc and oracle:
                pair = next(pr for pr in registry(sc) if pr.metric == oracle)
                r = evaluate(pair, sf.mc, rare_trials=None)
                m, se = r["mc_mean"], r["mc_se"]
        rows.append({"snr_db": snr, "closed_form": cf, "high_snr_approx": hi,
                     "mc_mean": m, "mc_se": se})
    return rows


# --------------------------------------------------------------- regions

REGION_MODES = ("dl-icsi", "dl-scsi", "ul", "fdsac-dl", "fdsac-ul")


def cmd_region(sf: ScenarioFile, mode: str, csi: str = "icsi", varrho: Optional[float] = None,
               model=None, hs=None) -> RateRegion:
    if mode not in REGION_MODES:
        raise UsageError(f"unknown region mode {mode!r}; valid: {', '.join(REGION_MODES)}")
    if model is None:
        model, hs = _prepare(sf)
    p = sf.params if varrho is None else sf.params.with_(varrho=varrho)
    g = sf.grids
    rng = np.random.Generator(np.random.Philox(key=[sf.mc.seed, stream_id(f"region-{mode}")]))
    if mode == "dl-icsi":
        return downlink_region_icsi(model, hs, p, g.tau, g.region_trials, rng)
    if mode == "dl-scsi":
        return downlink_region_scsi(model, hs, p, g.tau, g.sdr_draws, rng)
    pu = ul.apply_interference(p)
    if mode == "ul":
        sc_pair, cc_pair = ul.uplink_corner_pairs(model, hs, pu, sf.array, csi)
        reg = uplink_region(sc_pair, cc_pair, g.epsilon, design=f"ts-ul-{csi}")
        reg.meta.update({"varrho": p.varrho, "csi": csi})
        return reg
    if mode == "fdsac-dl":
        return fdsac_region(p, model, hs, g.kappa, g.iota, "downlink", csi)
    return fdsac_region(pu, model, hs, g.kappa, None, "uplink", csi)


# --------------------------------------------------------------- output


def fmt(x, digits: int = 12) -> str:
    if isinstance(x, str):
        return x
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    # repr-style formatting is locale independent
    return format(float(x), f".{digits}g")


def write_csv(path: str, rows: list, columns: list, digits: int = 12) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r[c], digits) for c in columns])
    data = buf.getvalue().encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(data)
    return hashlib.sha256(data).hexdigest()


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, float)):
        v = float(o)
        return v if math.isfinite(v) else str(v)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    return o


def write_json(path: str, obj) -> str:
    data = (json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n").encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(data)
    return hashlib.sha256(data).hexdigest()


def _scenario_doc(sf: ScenarioFile) -> dict:
    # worker count never changes results, so it stays out of the hash
    doc = {k: dict(v) for k, v in sf.raw.items()}
    doc.get("mc", {}).pop("workers", None)
    return doc


def write_manifest(out: str, sf: ScenarioFile, command: dict, files: dict, meta=None) -> None:
    man = {"library": "holoisac", "version": __version__, "command": command,
           "scenario": _scenario_doc(sf), "scenario_hash": scenario_hash(_scenario_doc(sf)),
           "files": files}
    if meta:
        man["meta"] = meta
    write_json(os.path.join(out, "manifest.json"), man)


# --------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="holoisac", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON file (defaults when omitted)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, help="master seed (overrides mc.seed)")
    common.add_argument("--workers", type=int, help="parallel lanes (results do not depend on it)")
    sub = ap.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("sweep", parents=[common], help="metric vs SNR")
    sp.add_argument("--link", choices=("downlink", "uplink"), default="downlink")
    sp.add_argument("--metric", choices=("sr", "ecr", "op"), required=True)
    sp.add_argument("--design", choices=("sc", "cc", "pareto", "fdsac"), required=True)
    sp.add_argument("--csi", choices=BOTH, default="icsi")
    sp.add_argument("--tau", type=float, help="rate-profile knob for the pareto design")
    sp.add_argument("--no-mc", action="store_true", help="skip the Monte Carlo columns")

    rp = sub.add_parser("region", parents=[common], help="SR-CR region boundary")
    rp.add_argument("--mode", choices=REGION_MODES, required=True)
    rp.add_argument("--csi", choices=BOTH, default="icsi")
    rp.add_argument("--varrho", type=float, help="uplink interference ratio")
    rp.add_argument("--contain-in", choices=REGION_MODES,
                    help="also build this region and require containment in it")
    rp.add_argument("--outer-csi", choices=BOTH, help="CSI mode of the outer region")
    rp.add_argument("--outer-varrho", type=float, help="interference ratio of the outer region")

    vp = sub.add_parser("validate", parents=[common], help="closed forms vs Monte Carlo")
    vp.add_argument("--tamper", type=float, default=1.0,
                    help="test mode: scale the eigenvalues seen by the closed forms")
    return ap


def main(argv: Optional[list] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        sf = load(args.config, seed=args.seed, workers=args.workers)
        os.makedirs(args.out, exist_ok=True)
        digits = int(sf.output.get("digits", 12))
        if args.cmd == "sweep":
            rows = cmd_sweep(sf, args.link, args.metric, args.design, args.csi, args.tau,
                             with_mc=not args.no_mc)
            name = f"sweep_{args.link}_{args.metric}_{args.design}_{args.csi}.csv"
            cols = ["snr_db", "closed_form", "high_snr_approx", "mc_mean", "mc_se"]
            digest = write_csv(os.path.join(args.out, name), rows, cols, digits)
            write_manifest(args.out, sf, {"cmd": "sweep", "link": args.link, "metric": args.metric,
                                          "design": args.design, "csi": args.csi, "tau": args.tau},
                           {name: digest})
            print(f"wrote {name} ({len(rows)} rows)")
            return EXIT_OK
        if args.cmd == "region":
            model, hs = _prepare(sf)
            reg = cmd_region(sf, args.mode, args.csi, args.varrho, model, hs)
            label = f"{args.mode}-{args.csi}"
            name = f"region_{args.mode}_{args.csi}.csv"
            cols = ["knob", "sr", "cr", "design", "label"]
            files = {name: write_csv(os.path.join(args.out, name), list(reg.rows(label)), cols, digits)}
            meta = {"region": reg.meta}
            status = EXIT_OK
            if args.contain_in:
                ocsi = args.outer_csi or args.csi
                outer = cmd_region(sf, args.contain_in, ocsi,
                                   args.outer_varrho if args.outer_varrho is not None else None,
                                   model, hs)
                oname = f"region_{args.contain_in}_{ocsi}_outer.csv"
                files[oname] = write_csv(os.path.join(args.out, oname),
                                         list(outer.rows(f"{args.contain_in}-{ocsi}")), cols, digits)
                rep = check_containment(reg, outer)
                meta["containment"] = {"outer": args.contain_in, "checked": rep.checked,
                                       "violations": [list(map(str, v)) for v in rep.violations]}
                print(f"containment in {args.contain_in}: {len(rep.violations)} violations "
                      f"over {rep.checked} points")
                status = EXIT_OK if rep.ok else EXIT_FAIL
            write_manifest(args.out, sf, {"cmd": "region", "mode": args.mode, "csi": args.csi,
                                          "varrho": args.varrho, "contain_in": args.contain_in},
                           files, meta)
            print(f"wrote {name} ({len(reg.points)} rows)")
            return status
        report = run_validation(sf.array, sf.params, sf.mc, tamper=args.tamper)
        digest = write_json(os.path.join(args.out, "validation.json"), report)
        write_manifest(args.out, sf, {"cmd": "validate", "tamper": args.tamper},
                       {"validation.json": digest})
        for r in report["pairings"]:
            print(f"{'PASS' if r['pass'] else 'FAIL'} {r['metric']}: closed={r['closed_form']:.6g} "
                  f"mc={r['mc_mean']:.6g}±{r['mc_se']:.2g} z={r['z_score']:+.2f}")
        for r in report["invariants"]:
            print(f"{'PASS' if r['pass'] else 'FAIL'} {r['name']}: {r['value']:.3g}")
        return EXIT_OK if report["pass"] else EXIT_FAIL
    except (UsageError, ConfigError, DomainError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HoloIsacError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
