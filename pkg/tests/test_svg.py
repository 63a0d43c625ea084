import xml.etree.ElementTree as ET

from sbflow.svg import histogram_overlay, loglog_plot

NS = "{http://www.w3.org/2000/svg}"


def test_histogram_overlay_is_valid_svg(tmp_path):
    text = histogram_overlay([0, 1, 2, 3], [0.2, 0.5, 0.0], [0, 1.5, 3], [0.1, 0.4, 0.1], "t = 1", tmp_path / "h.svg")
    root = ET.fromstring(text.split("\n", 1)[1])
    assert root.tag == NS + "svg" and root.get("version") == "1.1"
    # background, frame, two non-empty bars
    assert len(root.findall(NS + "rect")) == 4
    assert len(root.findall(NS + "polyline")) == 1
    assert (tmp_path / "h.svg").read_text() == text


def test_loglog_plot_skips_nonpositive():
    text = loglog_plot([0.1, 0.05, 0.0], {"err": [0.01, 0.005, 0.001], "bad": [0.0, -1.0, 0.0]})
    root = ET.fromstring(text.split("\n", 1)[1])
    assert len(root.findall(NS + "circle")) == 2
