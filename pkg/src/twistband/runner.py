"""Pipeline orchestration behind the CLI commands.

Each run_* function takes a RunConfig, writes its files into the output
directory and returns a JSON-serializable bundle.  Bundles are free of
wall-clock data so reruns with the same config and seed are byte-identical.
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np

from . import report as rpt
from .bands import bkrs_fit, sweep_bands, track_branches
from .config import RunConfig
from .critical import band_window_bound, critical_set, find_crossings, find_stationary
from .errors import ConfigError
from .flow import gaussian, generator_check, integrate_flow
from .fourier import position_form_check
from .geometry import build_grid
from .mourre import build_gamma, build_window, verify_mourre
from .operators import assemble_operators, weyl_check
from .bumps import BumpGamma, Plateau
from .tube import assemble_tube, fiber_band_edge, hs_diagnostic, tube_low_spectrum

REPORT_SCHEMA = "twistband/report-v1"


class Session:
    """Caches the grid, operators, sweep and branches across commands."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.outdir = Path(config.output_dir)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self._ops = None
        self._table = None
        self._branches = None
        self.timings = {}

    @property
    def ops(self):
        if self._ops is None:
            t0 = time.perf_counter()
            self._ops = assemble_operators(build_grid(self.config.geometry))
            self.timings["assemble"] = time.perf_counter() - t0
        return self._ops

    @property
    def table(self):
        if self._table is None:
            t0 = time.perf_counter()
            self._table = sweep_bands(
                self.ops, self.config.beta, self.config.kgrid(), self.config.nmax,
                jobs=self.config.jobs,
            )
            self.timings["sweep"] = time.perf_counter() - t0
        return self._table

    @property
    def branches(self):
        if self._branches is None:
            self._branches = track_branches(self.table)
        return self._branches


def run_bands(session: Session) -> dict:
    table = session.table
    branches = session.branches
    rpt.write_bands_csv(session.outdir / "bands.csv", table)
    rpt.write_branches_csv(session.outdir / "branches.csv", branches)
    rpt.write_bands_svg(session.outdir / "bands.svg", table, branches)
    cfit = bkrs_fit(table)
    bundle = {
        "schema": "twistband/bands-v1",
        "nk": table.nk,
        "nmax": table.nmax,
        "nnodes": table.ops.nnodes,
        "area": table.ops.grid.area,
        "E1_0": float(table.energies[table.nearest_index(0.0), 0]),
        "bkrs_c": cfit,
        "symmetry_residual": table.symmetry_residual(),
        "branch_multiplicities": [br.multiplicity for br in session.branches],
        "files": ["bands.csv", "branches.csv", "bands.svg"],
    }
    rpt.write_json(session.outdir / "bands.json", bundle)
    return bundle


def run_critical(session: Session) -> dict:
    table = session.table
    branches = session.branches
    stationary = find_stationary(branches)
    crossings, benign = find_crossings(branches)
    R = session.config.R
    if R is None:
        R = float(table.energies.max())
    cset = critical_set(stationary, crossings, R, benign=benign, table=table)
    cfit = bkrs_fit(table)
    bound = band_window_bound(table, R, cfit, branches=branches)
    from .critical import write_report

    doc = write_report(session.outdir / "critical.json", cset, bound)
    return doc


def run_mourre(session: Session) -> dict:
    config = session.config
    table = session.table
    branches = session.branches
    stationary = find_stationary(branches)
    crossings, benign = find_crossings(branches)
    R = max(config.energies) + config.delta if config.energies else config.delta
    cset = critical_set(stationary, crossings, R, benign=benign, table=table)
    results = []
    for E in config.energies:
        window = build_window(E, config.delta, branches, cset)
        gamma = build_gamma(window, branches)
        chi = window.chi()
        rep = verify_mourre(window, gamma, chi, table)
        tag = f"{E:.6g}".replace(".", "p").replace("-", "m")
        doc = rep.to_dict()
        doc["delta_final"] = window.delta
        doc["J0"] = [[J.a, J.b, J.k0, list(J.bands)] for J in window.J0]
        doc["J1"] = [[J.a, J.b, J.k0, list(J.bands)] for J in window.J1]
        rpt.write_json(session.outdir / f"mourre_{tag}.json", doc)
        rpt.write_mourre_svg(
            session.outdir / f"mourre_{tag}.svg", table, window, gamma,
            title=f"window E={E:.6g}",
        )
        results.append(doc)
    summary = {
        "schema": "twistband/mourre-summary-v1",
        "all_pass": all(r["pass"] for r in results),
        "windows": results,
    }
    rpt.write_json(session.outdir / "mourre_summary.json", summary)
    return summary


def default_flow_gamma() -> BumpGamma:
    """Standard bump used by the flow pipeline: +1 plateau on [-1, 1]."""
    return BumpGamma(plateaus=[Plateau(a=-1.0, b=1.0, sign=1.0, wl=0.75, wr=0.75)])


def run_flow(session: Session) -> dict:
    gamma = default_flow_gamma()
    kgrid = np.linspace(-6.0, 6.0, 1201)
    flow = integrate_flow(gamma, np.linspace(-3, 3, 25), T=1.0, dt=0.05)
    rpt.write_flow_csv(session.outdir / "flow.csv", flow)
    f = gaussian(kgrid, center=0.3, width=0.8)
    gen_rows = generator_check(gamma, f)
    residual, kernel = position_form_check(gamma, f, pad=4)
    bundle = {
        "schema": "twistband/flow-v1",
        "jacobian_min": float(flow.dkphi.min()),
        "generator_residuals": [{"dt": dt, "residual": r} for dt, r in gen_rows],
        "position_form_residual": residual,
        "kernel_tail_fraction": kernel.tail_fraction,
        "files": ["flow.csv"],
    }
    rpt.write_json(session.outdir / "flow.json", bundle)
    return bundle


def run_tube(session: Session) -> dict:
    config = session.config
    if config.tube is None:
        raise ConfigError("tube command needs a 'tube' config section", field="tube")
    tc = config.tube
    profile = tc.profile(config.beta)
    ltubes = list(tc.ltube_list) or [tc.Ltube]
    spectra = []
    for L in ltubes:
        op = assemble_tube(session.ops, profile, L, tc.h3)
        spectra.append(tube_low_spectrum(op, nev=min(8, 30)))
    rpt.write_tube_csv(session.outdir / "tube.csv", spectra)
    edge = fiber_band_edge(session.ops, config.beta)
    hs = []
    last_op = assemble_tube(session.ops, profile, ltubes[-1], tc.h3)
    norm, info = hs_diagnostic(last_op, alpha=2.0, seed=config.seed)
    hs.append({"alpha": 2.0, "Ltube": ltubes[-1], "norm": norm, "method": info["method"]})
    bundle = {
        "schema": "twistband/tube-v1",
        "band_edge": edge,
        "profile": tc.profile_kind,
        "spectra": [s.to_dict() for s in spectra],
        "hs": hs,
        "files": ["tube.csv"],
    }
    rpt.write_json(session.outdir / "tube.json", bundle)
    return bundle


def run_report(session: Session) -> dict:
    """Full pipeline: every stage, one JSON bundle, one markdown summary."""
    config = session.config
    bands = run_bands(session)
    critical = run_critical(session)
    mourre = run_mourre(session) if config.energies else None
    flow = run_flow(session)
    tube = run_tube(session) if config.tube is not None else None
    weyl_rows = weyl_check(session.ops, lambda_max=float(session.table.energies.max()))
    bundle = {
        "schema": REPORT_SCHEMA,
        "config": config.echo(),
        "bands": bands,
        "critical": critical,
        "mourre": mourre,
        "flow": flow,
        "tube": tube,
        "weyl": [{"lambda": l, "count": c, "ratio": r} for l, c, r in weyl_rows],
    }
    rpt.write_json(session.outdir / "report.json", bundle)

    sections = [
        ("configuration", [{"key": k, "value": str(v)} for k, v in config.echo().items()]),
        ("bands", [{
            "nodes": bands["nnodes"], "area": bands["area"], "E1(0)": bands["E1_0"],
            "bkrs c": bands["bkrs_c"], "symmetry residual": bands["symmetry_residual"],
        }]),
        ("weyl law", [{"lambda": l, "count": c, "ratio": r} for l, c, r in weyl_rows]),
        ("critical levels", [{
            "stationary": len(critical["E1"]), "crossings": len(critical["E2"]),
            "benign": len(critical["benign"]), "kR": critical.get("kR"),
            "NR": critical.get("NR"),
        }]),
    ]
    if mourre is not None:
        sections.append(("mourre windows", [
            {"E": w["E"], "delta": w["delta"], "c_est": w["c_est"],
             "d0": w["d0"], "d1": w["d1"], "pass": w["pass"]}
            for w in mourre["windows"]
        ]))
    sections.append(("flow and group", [{
        "jacobian min": flow["jacobian_min"],
        "position form residual": flow["position_form_residual"],
        "generator residual (smallest dt)": flow["generator_residuals"][-1]["residual"],
    }]))
    if tube is not None:
        sections.append(("tube", [
            {"Ltube": s["Ltube"], "lambda1": s["values"][0], "band edge": s["band_edge"],
             "below edge": s["count_below_edge"]}
            for s in tube["spectra"]
        ]))
    sections.append(("wall times (s)", [
        {"stage": k, "seconds": f"{v:.2f}"} for k, v in session.timings.items()
    ]))
    with open(session.outdir / "report.md", "w") as fh:
        fh.write("# twistband run report\n\n")
        fh.write(rpt.render_markdown(sections))
    return bundle
