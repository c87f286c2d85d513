from lxml import etree

from altphillips.svg import SVG_NAMESPACE, Series, SvgWriter
from tests.fixtures import *

NS = {"svg": SVG_NAMESPACE}


def _parse(document: str) -> etree.Element:
    return etree.fromstring(document.encode("utf-8"))


def test_plot_draws_one_polyline_per_series():
    series = [Series("a", [0.0, 1.0, 2.0], [0.0, 1.0, 4.0]), Series("b", [0.0, 2.0], [1.0, 1.0])]

    root = _parse(SvgWriter(title="test").plot(None, series))

    assert root.tag == f"{{{SVG_NAMESPACE}}}svg"
    assert len(root.findall(".//svg:polyline", NS)) == 2
    assert root.find("svg:title", NS).text == "test"
    legend = [t.text for t in root.findall(".//svg:text", NS)]
    assert "a" in legend and "b" in legend


def test_plot_maps_data_into_the_canvas():
    writer = SvgWriter(width=100, height=100, margin=10)

    root = _parse(writer.plot(None, [Series("a", [0.0, 1.0], [0.0, 1.0])]))

    points = root.find(".//svg:polyline", NS).get("points")
    assert points == "10.000,90.000 90.000,10.000"


def test_plot_of_constant_series():
    root = _parse(SvgWriter().plot(None, [Series("flat", [1.0, 1.0], [2.0, 2.0])]))

    assert len(root.findall(".//svg:polyline", NS)) == 1


def test_plot_writes_file(tmp_path):
    path = tmp_path / "plot.svg"

    SvgWriter().plot(str(path), [Series("a", [0.0, 1.0], [0.0, 1.0])])

    assert _parse(path.read_text(encoding="utf-8")).find(".//svg:polyline", NS) is not None


def test_series_rejects_mismatched_lengths():
    with pytest.raises(ValueError):
        Series("a", [0.0, 1.0], [0.0])


def test_overlay_groups_segments():
    found = np.array([[[0.5, 0.0], [0.5, 0.5]], [[0.5, 0.5], [0.5, 1.0]]])
    reference = np.array([[[0.5, 0.0], [0.5, 1.0]]])

    root = _parse(SvgWriter().overlay(None, (0.0, 1.0, 0.0, 1.0), found, reference))

    assert len(root.findall(".//svg:g[@id='free-boundary']/svg:polyline", NS)) == 2
    assert len(root.findall(".//svg:g[@id='reference']/svg:polyline", NS)) == 1


def test_overlay_without_segments():
    root = _parse(SvgWriter().overlay(None, (0.0, 1.0, 0.0, 0.5), np.zeros((0, 2, 2)), np.zeros((0, 2, 2))))

    assert root.findall(".//svg:polyline", NS) == []
