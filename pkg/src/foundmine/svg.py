"""Dependency-free SVG 1.1 emission for report figures.

Plots are acceptance artifacts, not an interactive surface, so the
primitives stay deliberately small: a block heatmap for sorted
missingness, a labeled factor map, and a dendrogram with optional
per-leaf annotations. All floats are formatted with fixed precision so
re-runs are byte-identical.
"""

from __future__ import annotations

import numpy as np

_HEADER = (
    '<?xml version="1.0" encoding="UTF-8"?>\n'
    '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
    'width="{w:.0f}" height="{h:.0f}" viewBox="0 0 {w:.0f} {h:.0f}">\n'
)


def _fmt(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _esc(text: str) -> str:
    return (
        str(text)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def _doc(width: float, height: float, body: list) -> str:
    return _HEADER.format(w=width, h=height) + "\n".join(body) + "\n</svg>\n"


def _rect(x, y, w, h, fill, extra=""):
    return (
        f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" '
        f'height="{_fmt(h)}" fill="{fill}"{extra}/>'
    )


def _line(x1, y1, x2, y2, stroke="#333", width=1.0):
    return (
        f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
        f'stroke="{stroke}" stroke-width="{_fmt(width)}"/>'
    )


def _text(x, y, s, size=11, anchor="start", fill="#111", rotate=None):
    tr = ""
    if rotate is not None:
        tr = f' transform="rotate({_fmt(rotate)} {_fmt(x)} {_fmt(y)})"'
    return (
        f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{_fmt(size)}" '
        f'font-family="sans-serif" text-anchor="{anchor}" fill="{fill}"{tr}>'
        f"{_esc(s)}</text>"
    )


def heatmap(
    matrix: np.ndarray,
    row_breaks=(),
    col_breaks=(),
    title: str = "",
) -> str:
    """Binary heatmap; ones render white on a dark field, run-length encoded.

    Cells scale independently per axis so tall-and-narrow matrices stay
    readable. ``row_breaks``/``col_breaks`` draw cluster boundaries after
    the given row/column counts.
    """
    m = np.asarray(matrix)
    n_rows, n_cols = m.shape
    cell_w = max(1.0, min(16.0, 600.0 / max(n_cols, 1)))
    cell_h = max(1.0, min(16.0, 600.0 / max(n_rows, 1)))
    pad_top = 28.0 if title else 8.0
    pad = 8.0
    w = max(n_cols * cell_w + 2 * pad, 40.0 + 7.0 * len(title))
    h = n_rows * cell_h + pad_top + pad
    body = []
    if title:
        body.append(_text(pad, 18, title, size=13))
    body.append(_rect(pad, pad_top, n_cols * cell_w, n_rows * cell_h, "#20324c"))
    for i in range(n_rows):
        row = m[i]
        j = 0
        while j < n_cols:
            if row[j]:
                j0 = j
                while j < n_cols and row[j]:
                    j += 1
                body.append(
                    _rect(
                        pad + j0 * cell_w,
                        pad_top + i * cell_h,
                        (j - j0) * cell_w,
                        cell_h,
                        "#f5f5f0",
                    )
                )
            else:
                j += 1
    for rb in row_breaks:
        y = pad_top + rb * cell_h
        body.append(_line(pad, y, pad + n_cols * cell_w, y, stroke="#e0503c", width=1.2))
    for cb in col_breaks:
        x = pad + cb * cell_w
        body.append(
            _line(x, pad_top, x, pad_top + n_rows * cell_h, stroke="#e0503c", width=1.2)
        )
    return _doc(w, h, body)


def factor_map(
    points: list,
    title: str = "",
    xlabel: str = "dim 1",
    ylabel: str = "dim 2",
    width: float = 760,
    height: float = 560,
) -> str:
    """Scatter of labeled points on two axes through the origin.

    ``points`` is a list of (label, x, y) or (label, x, y, color).
    """
    pad = 52.0
    pad_top = 34.0 if title else 16.0
    xs = np.array([p[1] for p in points]) if points else np.zeros(1)
    ys = np.array([p[2] for p in points]) if points else np.zeros(1)
    span_x = max(np.abs(xs).max(), 1e-9) * 1.15
    span_y = max(np.abs(ys).max(), 1e-9) * 1.15
    plot_w = width - 2 * pad
    plot_h = height - pad_top - pad

    def sx(v):
        return pad + (v + span_x) / (2 * span_x) * plot_w

    def sy(v):
        return pad_top + (span_y - v) / (2 * span_y) * plot_h

    body = []
    if title:
        body.append(_text(pad, 20, title, size=13))
    body.append(_line(pad, sy(0), pad + plot_w, sy(0), stroke="#999", width=0.8))
    body.append(_line(sx(0), pad_top, sx(0), pad_top + plot_h, stroke="#999", width=0.8))
    body.append(_text(pad + plot_w - 4, sy(0) - 6, xlabel, size=10, anchor="end", fill="#555"))
    body.append(_text(sx(0) + 6, pad_top + 12, ylabel, size=10, fill="#555"))
    for p in points:
        label, x, y = p[0], p[1], p[2]
        color = p[3] if len(p) > 3 else "#1f62a8"
        body.append(
            f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3" fill="{color}"/>'
        )
        body.append(_text(sx(x) + 5, sy(y) - 4, label, size=9, fill="#333"))
    return _doc(width, height, body)


def dendrogram(
    merges: list,
    labels: list,
    annotations: list | None = None,
    title: str = "",
    width: float = 720,
    leaf_gap: float = 18.0,
) -> str:
    """Left-to-right dendrogram; ``merges`` follow the linkage convention.

    ``annotations`` adds one right-hand text per leaf (e.g. a rank).
    """
    n = len(labels)
    pad = 10.0
    pad_top = 30.0 if title else 12.0
    label_w = max((len(str(l)) for l in labels), default=4) * 6.5 + 12
    ann_w = 0.0
    if annotations is not None:
        ann_w = max((len(str(a)) for a in annotations), default=0) * 6.5 + 10
    tree_w = width - label_w - ann_w - 2 * pad
    height = pad_top + n * leaf_gap + pad

    order = _leaf_order(merges, n)
    ypos = {leaf: pad_top + (i + 0.5) * leaf_gap for i, leaf in enumerate(order)}
    max_h = max((m.height for m in merges), default=1.0) or 1.0

    def xh(hv):
        return pad + label_w + ann_w + tree_w * (hv / max_h)

    body = []
    if title:
        body.append(_text(pad, 18, title, size=13))
    for i, leaf in enumerate(order):
        y = ypos[leaf]
        body.append(_text(pad, y + 3.5, labels[leaf], size=10))
        if annotations is not None:
            body.append(
                _text(pad + label_w, y + 3.5, annotations[leaf], size=10, fill="#a04010")
            )
    node_y = dict(ypos)
    node_h = {i: 0.0 for i in range(n)}
    for step, m in enumerate(merges):
        new = n + step
        yl, yr = node_y[m.left], node_y[m.right]
        x = xh(m.height)
        body.append(_line(xh(node_h[m.left]), yl, x, yl, stroke="#333", width=1.1))
        body.append(_line(xh(node_h[m.right]), yr, x, yr, stroke="#333", width=1.1))
        body.append(_line(x, yl, x, yr, stroke="#333", width=1.1))
        node_y[new] = (yl + yr) / 2
        node_h[new] = m.height
    return _doc(width, height, body)


def _leaf_order(merges, n):
    """Depth-first leaf ordering so branches never cross."""
    children = {}
    for step, m in enumerate(merges):
        children[n + step] = (m.left, m.right)
    root = n + len(merges) - 1 if merges else 0
    order = []
    stack = [root]
    while stack:
        node = stack.pop()
        if node < n:
            order.append(node)
        else:
            l, r = children[node]
            stack.append(r)
            stack.append(l)
    return order
