"""Output emission: CSV dumps, hand-rolled SVG diagrams, JSON and markdown.

SVGs are written directly (no plotting dependency) so identical inputs give
identical bytes.  JSON is serialized with sorted keys and repr floats for
the same reason; wall-clock timings never enter report.json, only the
human-readable markdown summary.
"""

from __future__ import annotations

import json

import numpy as np

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f",
)


def write_json(path, doc: dict):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_bands_csv(path, table):
    with open(path, "w") as fh:
        fh.write("# twistband bands-v1\n")
        fh.write("k,n,E,dE\n")
        for j, k in enumerate(table.kgrid):
            for n in range(table.nmax):
                fh.write(f"{k!r},{n},{table.energies[j, n]!r},{table.velocities[j, n]!r}\n")


def write_branches_csv(path, branches):
    with open(path, "w") as fh:
        fh.write("# twistband branches-v1\n")
        fh.write("k,ell,lambda,dlambda,mult\n")
        for br in branches:
            for j, k in enumerate(br.kgrid):
                fh.write(
                    f"{k!r},{br.label},{br.values[j]!r},{br.velocities[j]!r},{br.multiplicity}\n"
                )


def write_flow_csv(path, flow):
    with open(path, "w") as fh:
        fh.write("# twistband flow-v1\n")
        fh.write("t,k,phi,dkphi\n")
        for i, t in enumerate(flow.tgrid):
            for j, k in enumerate(flow.kstarts):
                fh.write(f"{t!r},{k!r},{flow.phi[i, j]!r},{flow.dkphi[i, j]!r}\n")


def write_tube_csv(path, spectra):
    with open(path, "w") as fh:
        fh.write("# twistband tube-v1\n")
        fh.write("Ltube,i,lambda\n")
        for spec in spectra:
            for i, lam in enumerate(spec.values):
                fh.write(f"{spec.Ltube!r},{i},{lam!r}\n")


class SvgCanvas:
    """Minimal line plot writer with fixed margins and data-space mapping."""

    def __init__(self, width=720, height=480, xlim=(0, 1), ylim=(0, 1), title=""):
        self.width, self.height = width, height
        self.xlim, self.ylim = xlim, ylim
        self.margin = 52
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">',
            "<!-- twistband svg-v1 -->",
            f'<rect width="{width}" height="{height}" fill="white"/>',
        ]
        if title:
            self.parts.append(
                f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
                f'font-family="monospace" font-size="14">{title}</text>'
            )
        self._axes()

    def _map(self, x, y):
        m, w, h = self.margin, self.width, self.height
        (x0, x1), (y0, y1) = self.xlim, self.ylim
        px = m + (x - x0) / (x1 - x0) * (w - 2 * m)
        py = h - m - (y - y0) / (y1 - y0) * (h - 2 * m)
        return px, py

    def _axes(self):
        m, w, h = self.margin, self.width, self.height
        self.parts.append(
            f'<rect x="{m}" y="{m}" width="{w - 2 * m}" height="{h - 2 * m}" '
            'fill="none" stroke="#444" stroke-width="1"/>'
        )
        for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
            x = self.xlim[0] + frac * (self.xlim[1] - self.xlim[0])
            y = self.ylim[0] + frac * (self.ylim[1] - self.ylim[0])
            px, _ = self._map(x, self.ylim[0])
            _, py = self._map(self.xlim[0], y)
            self.parts.append(
                f'<text x="{px:.1f}" y="{h - m + 16}" text-anchor="middle" '
                f'font-family="monospace" font-size="10">{x:.3g}</text>'
            )
            self.parts.append(
                f'<text x="{m - 6}" y="{py + 3:.1f}" text-anchor="end" '
                f'font-family="monospace" font-size="10">{y:.3g}</text>'
            )

    def polyline(self, xs, ys, color, width=1.5, dash=None):
        pts = []
        for x, y in zip(xs, ys):
            px, py = self._map(float(x), float(y))
            pts.append(f"{px:.2f},{py:.2f}")
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{dash_attr} '
            f'points="{" ".join(pts)}"/>'
        )

    def hband(self, y0, y1, color, opacity=0.25):
        x0, _ = self._map(self.xlim[0], 0)
        x1, _ = self._map(self.xlim[1], 0)
        _, py1 = self._map(self.xlim[0], y1)
        _, py0 = self._map(self.xlim[0], y0)
        self.parts.append(
            f'<rect x="{x0:.1f}" y="{py1:.1f}" width="{x1 - x0:.1f}" '
            f'height="{py0 - py1:.1f}" fill="{color}" opacity="{opacity}"/>'
        )

    def vband(self, x0, x1, color, opacity=0.25):
        px0, _ = self._map(x0, self.ylim[0])
        px1, _ = self._map(x1, self.ylim[0])
        _, py_top = self._map(self.xlim[0], self.ylim[1])
        _, py_bot = self._map(self.xlim[0], self.ylim[0])
        self.parts.append(
            f'<rect x="{px0:.1f}" y="{py_top:.1f}" width="{px1 - px0:.1f}" '
            f'height="{py_bot - py_top:.1f}" fill="{color}" opacity="{opacity}"/>'
        )

    def to_string(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_string())


def write_bands_svg(path, table, branches=None, title="band functions"):
    klim = (float(table.kgrid[0]), float(table.kgrid[-1]))
    elim = (0.0, float(table.energies.max()) * 1.05)
    svg = SvgCanvas(xlim=klim, ylim=elim, title=title)
    if branches is None:
        for n in range(table.nmax):
            svg.polyline(table.kgrid, table.energies[:, n], PALETTE[n % len(PALETTE)])
    else:
        for br in branches:
            svg.polyline(br.kgrid, br.values, PALETTE[br.label % len(PALETTE)])
    svg.write(path)


def write_mourre_svg(path, table, window, gamma, title="mourre window"):
    klim = (float(table.kgrid[0]), float(table.kgrid[-1]))
    elim = (0.0, float(table.energies.max()) * 1.05)
    svg = SvgCanvas(xlim=klim, ylim=elim, title=title)
    svg.hband(window.E - window.delta, window.E + window.delta, "#ffd37f", opacity=0.45)
    for J in window.Jints:
        svg.vband(J.a, J.b, "#9edb9e" if J.cls == 0 else "#db9e9e", opacity=0.4)
    for n in range(table.nmax):
        svg.polyline(table.kgrid, table.energies[:, n], PALETTE[n % len(PALETTE)])
    # gamma drawn rescaled at the bottom of the energy axis
    ks = np.linspace(klim[0], klim[1], 600)
    gv = np.asarray(gamma(ks))
    scale = 0.1 * (elim[1] - elim[0])
    svg.polyline(ks, 1.2 * scale + scale * gv, "#333333", width=1.0, dash="4,3")
    svg.write(path)


def render_markdown(sections) -> str:
    """sections: list of (heading, list-of-rows or text); rows are dicts."""
    out = []
    for heading, body in sections:
        out.append(f"## {heading}\n")
        if isinstance(body, str):
            out.append(body + "\n")
            continue
        if body:
            keys = list(body[0].keys())
            out.append("| " + " | ".join(keys) + " |")
            out.append("|" + "|".join("---" for _ in keys) + "|")
            for row in body:
                out.append("| " + " | ".join(_fmt(row[k]) for k in keys) + " |")
            out.append("")
    return "\n".join(out) + "\n"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, bool):
        return "yes" if v else "no"
    return str(v)
