"""Self-contained SVG plots: error norms against time and planar trajectory projections."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .graph import FormationGraph
from .sim import SimTrace

W, H = 640, 400
PAD = 56
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _polyline(xs: NDArray, ys: NDArray, color: str, width: float = 1.5, dash: str | None = None) -> str:
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<polyline points="{pts}" style="fill:none;stroke:{color};stroke-width:{width}"{extra}/>'


def _text(x: float, y: float, s: str, size: int = 12, anchor: str = "middle") -> str:
    return (f'<text x="{_fmt(x)}" y="{_fmt(y)}" style="font-family:sans-serif;font-size:{size}px;'
            f'text-anchor:{anchor}">{s}</text>')


def _frame(x0: float, y0: float, w: float, h: float) -> str:
    return f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(w)}" height="{_fmt(h)}" style="fill:none;stroke:#333"/>'


def _doc(body: list[str], width: int = W, height: int = H) -> str:
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n<rect width="100%" height="100%" style="fill:white"/>\n'
            + "\n".join(body) + "\n</svg>\n")


def _decimate(n: int, cap: int = 2000) -> NDArray[np.intp]:
    step = max(1, math.ceil(n / cap))
    idx = np.arange(0, n, step)
    return idx if idx[-1] == n - 1 else np.append(idx, n - 1)


def error_plot_svg(trace: SimTrace, title: str = "error norms") -> str:
    """Log-scale error norms. Zero samples are clipped to the plot floor."""
    series = [("||p~||", trace.err_p), ("||p~ - U q0||", trace.err_delta)]
    if trace.kind == "double":
        series.append(("||v~||", trace.err_v))
    idx = _decimate(len(trace.t))
    t = trace.t[idx]
    pos = np.concatenate([s[idx][s[idx] > 0] for _, s in series] or [np.array([1.0])])
    hi = math.ceil(math.log10(pos.max())) if pos.size else 0
    lo = max(math.floor(math.log10(pos.min())) if pos.size else hi - 1, hi - 12)
    if lo == hi:
        lo -= 1
    x0, y0, w, h = PAD, 30, W - PAD - 20, H - 30 - PAD
    tspan = max(float(t[-1] - t[0]), 1e-12)

    def X(tt):
        return x0 + (tt - t[0]) / tspan * w

    def Y(v):
        lv = np.log10(np.clip(v, 10.0 ** lo, None))
        return y0 + (hi - lv) / (hi - lo) * h

    body = [_frame(x0, y0, w, h), _text(W / 2, 18, title, 14)]
    for e in range(lo, hi + 1):
        yy = Y(10.0 ** e)
        body.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(yy)}" x2="{_fmt(x0 + w)}" y2="{_fmt(yy)}" '
                    f'style="stroke:#ddd"/>')
        body.append(_text(x0 - 6, yy + 4, f"1e{e}", 10, "end"))
    for k in range(6):
        tt = t[0] + k * tspan / 5
        body.append(_text(X(tt), y0 + h + 16, f"{tt:g}", 10))
    body.append(_text(x0 + w / 2, H - 12, "t [s]", 12))
    for k, (label, s) in enumerate(series):
        c = COLORS[k]
        body.append(_polyline(X(t), Y(s[idx]), c))
        body.append(_text(x0 + w - 8, y0 + 16 + 16 * k, label, 12, "end").replace("<text", f'<text fill="{c}"', 1))
    return _doc(body)


def _panel(P: NDArray, Ps: NDArray, g: FormationGraph, axes: tuple[int, int], snaps: Sequence[int],
           x0: float, y0: float, w: float, h: float, names: str) -> list[str]:
    a, b = axes
    allx = np.concatenate([P[:, :, a].ravel(), Ps[:, :, a].ravel()])
    ally = np.concatenate([P[:, :, b].ravel(), Ps[:, :, b].ravel()])
    span = max(float(np.ptp(allx)), float(np.ptp(ally)), 1e-9) * 1.05
    cx, cy = 0.5 * (allx.max() + allx.min()), 0.5 * (ally.max() + ally.min())
    s = min(w, h) / span

    def X(v):
        return x0 + w / 2 + (v - cx) * s

    def Y(v):
        return y0 + h / 2 - (v - cy) * s

    out = [_frame(x0, y0, w, h), _text(x0 + w / 2, y0 + h + 16, f"{names[a]}-{names[b]} projection", 11)]
    for i in range(P.shape[1]):
        out.append(_polyline(X(P[:, i, a]), Y(P[:, i, b]), COLORS[i % len(COLORS)], 1.0))
    for k in snaps:
        for e in range(g.m):
            ti, hj = g.tails[e], g.heads[e]
            out.append(f'<line x1="{_fmt(X(P[k, ti, a]))}" y1="{_fmt(Y(P[k, ti, b]))}" '
                       f'x2="{_fmt(X(P[k, hj, a]))}" y2="{_fmt(Y(P[k, hj, b]))}" style="stroke:#555;stroke-width:0.8"/>')
        for i in range(P.shape[1]):
            out.append(f'<circle cx="{_fmt(X(P[k, i, a]))}" cy="{_fmt(Y(P[k, i, b]))}" r="3" '
                       f'style="fill:{COLORS[i % len(COLORS)]}"/>')
    return out


def trajectory_plot_svg(trace: SimTrace, g: FormationGraph, n_snapshots: int = 4,
                        title: str = "agent trajectories") -> str:
    """Agent paths with formation snapshots; ``d = 3`` shows the x-y and y-z projections."""
    idx = _decimate(len(trace.t), 1500)
    P = (trace.p_hat if trace.p_hat is not None else trace.p)[idx].reshape(len(idx), g.n, g.d)
    Ps = trace.p_star[idx].reshape(len(idx), g.n, g.d)
    snaps = sorted({int(round(k)) for k in np.linspace(0, len(idx) - 1, n_snapshots)})
    names = "xyz" if g.d <= 3 else "".join(str(k) for k in range(g.d))
    body = [_text(W / 2, 18, title, 14)]
    if g.d == 2:
        body += _panel(P, Ps, g, (0, 1), snaps, PAD, 30, W - 2 * PAD, H - 30 - PAD, names)
    else:
        pw = (W - 3 * 30) / 2
        body += _panel(P, Ps, g, (0, 1), snaps, 30, 30, pw, H - 30 - PAD, names)
        body += _panel(P, Ps, g, (1, 2), snaps, 60 + pw, 30, pw, H - 30 - PAD, names)
    return _doc(body)


def write_plots(trace: SimTrace, g: FormationGraph, out: Path, prefix: str = "") -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{prefix}errors.svg", out / f"{prefix}trajectory.svg"]
    paths[0].write_text(error_plot_svg(trace), encoding="utf-8")
    paths[1].write_text(trajectory_plot_svg(trace, g), encoding="utf-8")
    return paths
