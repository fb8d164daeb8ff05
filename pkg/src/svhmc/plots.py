"""Deterministic SVG emission for return traces and volatility bands.

The files are self-contained static plots written without any drawing
dependency: fixed canvas, fixed decimal formatting, and no timestamps, so
identical inputs produce identical bytes.
"""

from __future__ import annotations

import numpy as np

__all__ = ["series_svg", "band_svg"]

_WIDTH = 900
_HEIGHT = 300
_MARGIN_L = 64
_MARGIN_R = 16
_MARGIN_T = 34
_MARGIN_B = 36


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def _axis_label(x: float) -> str:
    return f"{x:.4g}"


class _Frame:
    """Maps data coordinates onto the fixed plot viewport."""

    def __init__(self, n: int, lo: float, hi: float):
        if hi <= lo:
            pad = 0.5 if hi == lo else 0.0
            lo, hi = lo - pad, hi + pad
        span = hi - lo
        lo -= 0.05 * span
        hi += 0.05 * span
        self.lo, self.hi = lo, hi
        self.n = n
        self.x0, self.x1 = _MARGIN_L, _WIDTH - _MARGIN_R
        self.y0, self.y1 = _HEIGHT - _MARGIN_B, _MARGIN_T

    def x(self, i: int) -> float:
        if self.n == 1:
            return 0.5 * (self.x0 + self.x1)
        return self.x0 + (self.x1 - self.x0) * i / (self.n - 1)

    def y(self, v: float) -> float:
        return self.y0 + (self.y1 - self.y0) * (v - self.lo) / (self.hi - self.lo)

    def polyline_points(self, values: np.ndarray) -> str:
        return " ".join(
            f"{_fmt(self.x(i))},{_fmt(self.y(v))}" for i, v in enumerate(values)
        )


def _check(values, name: str) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d array")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def _document(body: list[str], title: str, comment: str | None) -> str:
    head = [
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{_WIDTH}" height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
    ]
    if comment:
        head.insert(0, f"<!-- {comment} -->")
    head.append(f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>')
    head.append(
        f'<text x="{_MARGIN_L}" y="20" font-family="sans-serif" font-size="13" '
        f'fill="#222">{title}</text>'
    )
    return "\n".join(head + body + ["</svg>"]) + "\n"


def _frame_elements(frame: _Frame) -> list[str]:
    els = [
        f'<line x1="{frame.x0}" y1="{frame.y0}" x2="{frame.x1}" y2="{frame.y0}" '
        'stroke="#444" stroke-width="1"/>',
        f'<line x1="{frame.x0}" y1="{frame.y0}" x2="{frame.x0}" y2="{frame.y1}" '
        'stroke="#444" stroke-width="1"/>',
    ]
    for frac in (0.0, 0.5, 1.0):
        v = frame.lo + frac * (frame.hi - frame.lo)
        y = _fmt(frame.y(v))
        els.append(
            f'<text x="{_MARGIN_L - 6}" y="{y}" font-family="sans-serif" '
            f'font-size="10" fill="#444" text-anchor="end" '
            f'dominant-baseline="middle">{_axis_label(v)}</text>'
        )
    els.append(
        f'<text x="{frame.x0}" y="{_HEIGHT - 12}" font-family="sans-serif" '
        f'font-size="10" fill="#444">1</text>'
    )
    els.append(
        f'<text x="{frame.x1}" y="{_HEIGHT - 12}" font-family="sans-serif" '
        f'font-size="10" fill="#444" text-anchor="end">{frame.n}</text>'
    )
    return els


def series_svg(values, title: str = "Returns", comment: str | None = None) -> str:
    """Line trace of a series; one polyline vertex per observation."""
    x = _check(values, "series")
    frame = _Frame(x.size, float(x.min()), float(x.max()))
    body = _frame_elements(frame)
    body.append(
        f'<polyline fill="none" stroke="#1f5fa8" stroke-width="1" '
        f'points="{frame.polyline_points(x)}"/>'
    )
    return _document(body, title, comment)


def band_svg(mean, lo, hi, title: str = "Volatility", truth=None,
             comment: str | None = None) -> str:
    """Central band (shaded), posterior mean line, optional truth overlay."""
    m = _check(mean, "mean")
    lo = _check(lo, "lo")
    hi = _check(hi, "hi")
    if not (m.size == lo.size == hi.size):
        raise ValueError("mean, lo, hi must have equal length")
    if np.any(lo > hi):
        raise ValueError("band is inverted: lo exceeds hi")
    series = [m, lo, hi]
    if truth is not None:
        truth = _check(truth, "truth")
        if truth.size != m.size:
            raise ValueError("truth overlay length mismatch")
        series.append(truth)
    vmin = min(float(s.min()) for s in series)
    vmax = max(float(s.max()) for s in series)
    frame = _Frame(m.size, vmin, vmax)

    upper = frame.polyline_points(hi)
    lower = " ".join(
        f"{_fmt(frame.x(i))},{_fmt(frame.y(v))}"
        for i, v in zip(range(m.size - 1, -1, -1), lo[::-1])
    )
    body = _frame_elements(frame)
    body.append(
        f'<polygon fill="#9ec5e8" fill-opacity="0.55" stroke="none" '
        f'points="{upper} {lower}"/>'
    )
    body.append(
        f'<polyline fill="none" stroke="#1f5fa8" stroke-width="1.4" '
        f'points="{frame.polyline_points(m)}"/>'
    )
    if truth is not None:
        body.append(
            f'<polyline fill="none" stroke="#b33" stroke-width="1" '
            f'stroke-dasharray="4 3" points="{frame.polyline_points(truth)}"/>'
        )
    return _document(body, title, comment)
