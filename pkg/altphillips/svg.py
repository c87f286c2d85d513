"""Minimal SVG summaries: polylines on axes, and free boundaries over reference interfaces."""

from io import BytesIO
from typing import IO, Optional, Sequence, Tuple, Union

import attr
import numpy as np
from lxml import etree

SVG_NAMESPACE = "http://www.w3.org/2000/svg"

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


@attr.s(slots=True, frozen=True)
class Series:
    """A labelled polyline in data coordinates."""

    label: str = attr.ib()
    xs: np.ndarray = attr.ib(converter=lambda v: np.asarray(v, dtype=float), eq=False)
    ys: np.ndarray = attr.ib(converter=lambda v: np.asarray(v, dtype=float), eq=False)

    @ys.validator
    def _check_lengths(self, attribute, value):
        if value.shape != self.xs.shape:
            raise ValueError(f"Series [{self.label}] has {self.xs.shape} abscissas but {value.shape} ordinates")


@attr.s(slots=True)
class SvgWriter:
    """Draws into a fixed-size canvas with a margin for the axes."""

    width: int = attr.ib(default=480)
    height: int = attr.ib(default=360)
    margin: int = attr.ib(default=40)
    title: str = attr.ib(default="")

    def _transform(self, bounds: Tuple[float, float, float, float]):
        x_min, x_max, y_min, y_max = bounds
        x_span = x_max - x_min or 1.0
        y_span = y_max - y_min or 1.0
        inner_w = self.width - 2 * self.margin
        inner_h = self.height - 2 * self.margin

        def to_canvas(x: np.ndarray, y: np.ndarray):
            cx = self.margin + (np.asarray(x) - x_min) / x_span * inner_w
            cy = self.height - self.margin - (np.asarray(y) - y_min) / y_span * inner_h
            return cx, cy

        return to_canvas

    def _root(self, bounds) -> etree.Element:
        root = etree.Element(
            etree.QName(SVG_NAMESPACE, "svg"),
            nsmap={None: SVG_NAMESPACE},
            width=str(self.width),
            height=str(self.height),
            viewBox=f"0 0 {self.width} {self.height}",
        )
        if self.title:
            title = etree.SubElement(root, etree.QName(SVG_NAMESPACE, "title"))
            title.text = self.title
        self._axes(root, bounds)
        return root

    def _axes(self, root: etree.Element, bounds):
        x_min, x_max, y_min, y_max = bounds
        left, bottom = self.margin, self.height - self.margin
        right, top = self.width - self.margin, self.margin
        group = etree.SubElement(root, etree.QName(SVG_NAMESPACE, "g"), stroke="black", fill="none")
        for x2, y2 in ((right, bottom), (left, top)):
            etree.SubElement(
                group, etree.QName(SVG_NAMESPACE, "line"), x1=str(left), y1=str(bottom), x2=str(x2), y2=str(y2)
            )

        labels = etree.SubElement(root, etree.QName(SVG_NAMESPACE, "g"), fill="black", **{"font-size": "10"})
        for text, x, y in (
            (f"{x_min:.4g}", left, bottom + 14),
            (f"{x_max:.4g}", right, bottom + 14),
            (f"{y_min:.4g}", 2, bottom),
            (f"{y_max:.4g}", 2, top + 4),
        ):
            label = etree.SubElement(labels, etree.QName(SVG_NAMESPACE, "text"), x=str(x), y=str(y))
            label.text = text

    def _polyline(self, parent: etree.Element, xs, ys, color: str, width: float = 1.5):
        points = " ".join(f"{x:.3f},{y:.3f}" for x, y in zip(xs, ys))
        etree.SubElement(
            parent,
            etree.QName(SVG_NAMESPACE, "polyline"),
            points=points,
            fill="none",
            stroke=color,
            **{"stroke-width": str(width)},
        )

    def _legend(self, root: etree.Element, labels: Sequence[Tuple[str, str]]):
        group = etree.SubElement(root, etree.QName(SVG_NAMESPACE, "g"), **{"font-size": "10"})
        for i, (label, color) in enumerate(labels):
            text = etree.SubElement(
                group,
                etree.QName(SVG_NAMESPACE, "text"),
                x=str(self.width - self.margin - 100),
                y=str(self.margin + 12 * (i + 1)),
                fill=color,
            )
            text.text = label

    def plot(self, sink: Union[IO, str, None], series: Sequence[Series]) -> Optional[str]:
        """Draws every series as a polyline on common axes.

        Args:
            sink: File path or file-like object, if `None` the document is returned as a string
            series: The curves

        Returns:
            If `sink` is None, then the SVG document is returned
        """
        finite = [s for s in series if len(s.xs)]
        xs = np.concatenate([s.xs for s in finite]) if finite else np.zeros(1)
        ys = np.concatenate([s.ys for s in finite]) if finite else np.zeros(1)
        bounds = (float(xs.min()), float(xs.max()), float(ys.min()), float(ys.max()))

        root = self._root(bounds)
        to_canvas = self._transform(bounds)
        colors = []
        for i, s in enumerate(series):
            color = _PALETTE[i % len(_PALETTE)]
            self._polyline(root, *to_canvas(s.xs, s.ys), color)
            colors.append((s.label, color))
        self._legend(root, colors)
        return self._write(root, sink)

    def overlay(
        self,
        sink: Union[IO, str, None],
        box: Tuple[float, float, float, float],
        found: np.ndarray,
        reference: np.ndarray,
    ) -> Optional[str]:
        """Draws two families of segments, shape (k, 2, 2), over the box ``(x_min, x_max, y_min, y_max)``."""
        root = self._root(box)
        to_canvas = self._transform(box)
        for segments, color, label in ((reference, _PALETTE[1], "reference"), (found, _PALETTE[0], "free boundary")):
            group = etree.SubElement(root, etree.QName(SVG_NAMESPACE, "g"), id=label.replace(" ", "-"))
            for segment in np.asarray(segments).reshape(-1, 2, 2):
                self._polyline(group, *to_canvas(segment[:, 0], segment[:, 1]), color, width=1.0)
        self._legend(root, [("free boundary", _PALETTE[0]), ("reference", _PALETTE[1])])
        return self._write(root, sink)

    def _write(self, root: etree.Element, sink: Union[IO, str, None]) -> Optional[str]:
        doc = etree.ElementTree(root)

        return_str = sink is None
        if return_str:
            sink = BytesIO()

        doc.write(sink, xml_declaration=True, pretty_print=True, encoding="UTF-8")

        if return_str:
            return sink.getvalue().decode("utf-8")

        return None
