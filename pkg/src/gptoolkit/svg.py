"""Standalone SVG figures: regression band, classification curve, latent scatter.

Series are ``<path>`` elements with stable ids (``band``, ``mean``,
``points``) so tests can compare structure rather than bytes.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=60, right=20, top=30, bottom=45)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _nice_ticks(lo, hi, count=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return [float(t) for t in np.arange(start, hi + 0.5 * step, step) if t <= hi + 1e-12]


class _Axes:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = self._pad(*xlim)
        self.y0, self.y1 = self._pad(*ylim)
        self.left = MARGIN["left"]
        self.right = WIDTH - MARGIN["right"]
        self.top = MARGIN["top"]
        self.bottom = HEIGHT - MARGIN["bottom"]

    @staticmethod
    def _pad(lo, hi):
        lo, hi = float(lo), float(hi)
        if hi - lo < 1e-12:
            lo, hi = lo - 0.5, hi + 0.5
        pad = 0.05 * (hi - lo)
        return lo - pad, hi + pad

    def px(self, x):
        return self.left + (np.asarray(x, dtype=float) - self.x0) / (self.x1 - self.x0) * (self.right - self.left)

    def py(self, y):
        return self.bottom - (np.asarray(y, dtype=float) - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)

    def frame(self, title, xlabel, ylabel):
        out = [
            f'<rect x="{self.left}" y="{self.top}" width="{self.right - self.left}" '
            f'height="{self.bottom - self.top}" fill="none" stroke="#444"/>'
        ]
        for t in _nice_ticks(self.x0, self.x1):
            x = self.px(t)
            out.append(f'<line x1="{x:.2f}" y1="{self.bottom}" x2="{x:.2f}" y2="{self.bottom + 5}" stroke="#444"/>')
            out.append(f'<text x="{x:.2f}" y="{self.bottom + 18}" font-size="11" text-anchor="middle">{t:.3g}</text>')
        for t in _nice_ticks(self.y0, self.y1):
            y = self.py(t)
            out.append(f'<line x1="{self.left - 5}" y1="{y:.2f}" x2="{self.left}" y2="{y:.2f}" stroke="#444"/>')
            out.append(f'<text x="{self.left - 8}" y="{y + 4:.2f}" font-size="11" text-anchor="end">{t:.3g}</text>')
        out.append(f'<text x="{WIDTH / 2}" y="18" font-size="14" text-anchor="middle">{escape(title)}</text>')
        out.append(f'<text x="{(self.left + self.right) / 2}" y="{HEIGHT - 8}" font-size="12" text-anchor="middle">{escape(xlabel)}</text>')
        out.append(
            f'<text x="14" y="{(self.top + self.bottom) / 2}" font-size="12" text-anchor="middle" '
            f'transform="rotate(-90 14 {(self.top + self.bottom) / 2})">{escape(ylabel)}</text>'
        )
        return out


def _polyline(xs, ys):
    return "M" + " L".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))


def _crosses(xs, ys, r=4.0):
    return " ".join(f"M{x - r:.2f},{y - r:.2f} L{x + r:.2f},{y + r:.2f} M{x - r:.2f},{y + r:.2f} L{x + r:.2f},{y - r:.2f}" for x, y in zip(xs, ys))


def _circles(xs, ys, r=3.5):
    return " ".join(f"M{x - r:.2f},{y:.2f} a{r},{r} 0 1,0 {2 * r},0 a{r},{r} 0 1,0 {-2 * r},0" for x, y in zip(xs, ys))


def _document(body):
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">\n'
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>\n' + "\n".join(body) + "\n</svg>\n"
    )


def regression_figure(x_train, y_train, x_star, mean, lo, hi, title="GP regression"):
    """Training points, predictive mean and shaded band (1-D inputs)."""
    x_train, y_train = np.ravel(x_train), np.ravel(y_train)
    x_star, mean, lo, hi = map(np.ravel, (x_star, mean, lo, hi))
    order = np.argsort(x_star, kind="stable")
    x_star, mean, lo, hi = x_star[order], mean[order], lo[order], hi[order]
    ax = _Axes(
        (min(x_star.min(), x_train.min()), max(x_star.max(), x_train.max())),
        (min(lo.min(), y_train.min()), max(hi.max(), y_train.max())),
    )
    band = _polyline(ax.px(x_star), ax.py(hi)) + " L" + " L".join(
        f"{x:.2f},{y:.2f}" for x, y in zip(ax.px(x_star[::-1]), ax.py(lo[::-1]))
    ) + " Z"
    body = ax.frame(title, "x", "y")
    body.append(f'<path id="band" d="{band}" fill="#9ecae1" fill-opacity="0.6" stroke="none"/>')
    body.append(f'<path id="mean" d="{_polyline(ax.px(x_star), ax.py(mean))}" fill="none" stroke="#08519c" stroke-width="2"/>')
    body.append(f'<path id="points" d="{_crosses(ax.px(x_train), ax.py(y_train))}" fill="none" stroke="#000" stroke-width="1.5"/>')
    return _document(body)


def classification_figure(x_train, labels, x_star, probs, title="GP classification"):
    """Training marks at 0/1 and probability curves (1-D inputs).

    ``labels`` are class indices; for a binary problem pass 0/1 and a
    single probability series ``probs`` of shape ``(m,)``.  Multi-class
    probabilities ``(m, C)`` give one curve per class (``mean-c``) and
    marks drawn at height 1 in the class colour.
    """
    x_train, labels = np.ravel(x_train), np.ravel(labels).astype(int)
    x_star = np.ravel(x_star)
    probs = np.asarray(probs, dtype=float)
    order = np.argsort(x_star, kind="stable")
    ax = _Axes((min(x_star.min(), x_train.min()), max(x_star.max(), x_train.max())), (0.0, 1.0))
    body = ax.frame(title, "x", "probability")
    if probs.ndim == 1:
        body.append(
            f'<path id="mean" d="{_polyline(ax.px(x_star[order]), ax.py(probs[order]))}" fill="none" stroke="#08519c" stroke-width="2"/>'
        )
        pos = labels == 1
        marks = _circles(ax.px(x_train[pos]), ax.py(np.ones(pos.sum()))) + " " + _crosses(
            ax.px(x_train[~pos]), ax.py(np.zeros((~pos).sum()))
        )
        body.append(f'<path id="points" d="{marks.strip()}" fill="none" stroke="#000" stroke-width="1.5"/>')
    else:
        for c in range(probs.shape[1]):
            colour = PALETTE[c % len(PALETTE)]
            body.append(
                f'<path id="mean-{c}" d="{_polyline(ax.px(x_star[order]), ax.py(probs[order, c]))}" fill="none" '
                f'stroke="{colour}" stroke-width="2"/>'
            )
        body.append('<g id="points">')
        for c in range(probs.shape[1]):
            sel = labels == c
            if sel.any():
                body.append(
                    f'<path id="points-{c}" d="{_crosses(ax.px(x_train[sel]), ax.py(np.ones(sel.sum())))}" fill="none" '
                    f'stroke="{PALETTE[c % len(PALETTE)]}" stroke-width="1.5"/>'
                )
        body.append("</g>")
    return _document(body)


def scatter_figure(latent, labels=None, title="GP-LVM latent space"):
    """Latent coordinates; ``q = 1`` is drawn against the point index."""
    latent = np.asarray(latent, dtype=float)
    if latent.ndim == 1:
        latent = latent[:, None]
    if latent.shape[1] == 1:
        xs, ys, xlabel, ylabel = np.arange(latent.shape[0], dtype=float), latent[:, 0], "point index", "x_1"
    else:
        xs, ys, xlabel, ylabel = latent[:, 0], latent[:, 1], "x_1", "x_2"
    ax = _Axes((xs.min(), xs.max()), (ys.min(), ys.max()))
    body = ax.frame(title, xlabel, ylabel)
    if labels is None:
        body.append(f'<path id="points" d="{_circles(ax.px(xs), ax.py(ys))}" fill="none" stroke="#08519c" stroke-width="1.5"/>')
    else:
        labels = np.ravel(labels)
        body.append('<g id="points">')
        for k, lab in enumerate(np.unique(labels)):
            sel = labels == lab
            body.append(
                f'<path id="points-{escape(format(lab, "g"))}" d="{_circles(ax.px(xs[sel]), ax.py(ys[sel]))}" fill="none" '
                f'stroke="{PALETTE[k % len(PALETTE)]}" stroke-width="1.5"/>'
            )
        body.append("</g>")
    return _document(body)
