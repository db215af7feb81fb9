import csv
import math
import re
import xml.etree.ElementTree as ET
from datetime import datetime, timezone

import numpy as np
import pytest

from persona_gauge.adaptability import AdaptTrajectory, PoiCatalog
from persona_gauge.core import RunConfig, RunManifest
from persona_gauge.reporting import (
    BAR_PLOT_HEIGHT,
    SD3_RADIUS,
    Bar,
    IoFailure,
    RunRecord,
    Table,
    VersionMismatch,
    category_color,
    compute_summaries,
    emit_adaptability_grid,
    emit_bars,
    emit_report,
    emit_sd3_triangles,
    load_run,
    persist_run,
)
from persona_gauge.runner import execute_run
from persona_gauge.safety import Sd3Scores

NS = "{http://www.w3.org/2000/svg}"


def _rects(svg, cls):
    root = ET.fromstring(svg)
    return [r for r in root.iter(f"{NS}rect") if r.get("class") == cls]


@pytest.fixture(scope="module")
def run_path(tmp_path_factory):
    cfg = RunConfig(master_seed=7, personas=["ENFJ", "ISTP"],
                    task_params={"adaptability": {"repeats": 2}, "bandit": {"blocks": 40}})
    root = tmp_path_factory.mktemp("runs")
    return execute_run(cfg, ["adaptability", "bandit", "reasoning", "safety"], root)


def _record():
    cfg = RunConfig(master_seed=1, personas=["INTP"])
    m = RunManifest.create(cfg, ["safety"], ["INTP"], datetime(2024, 1, 1, tzinfo=timezone.utc))
    return RunRecord(m, {"misc": [{"a": 1, "b": [1.5, None]}, {"a": 2}]})


def test_round_trip_and_byte_identical(tmp_path):
    rec = _record()
    rec.summaries = {"misc": Table(("persona", "score", "ok"), [("INTP", 0.1 + 0.2, True), ("ENFP", None, False)])}
    p1 = persist_run(rec, tmp_path / "a")
    p2 = persist_run(rec, tmp_path / "b")
    files = sorted(f.relative_to(p1) for f in p1.rglob("*") if f.is_file())
    assert files == sorted(f.relative_to(p2) for f in p2.rglob("*") if f.is_file())
    assert all((p1 / f).read_bytes() == (p2 / f).read_bytes() for f in files)
    back = load_run(p1)
    assert back.manifest == rec.manifest and back.raw == rec.raw and back.summaries == rec.summaries


def test_truncated_or_versioned_files_are_rejected(tmp_path):
    p = persist_run(_record(), tmp_path)
    raw = p / "raw" / "misc.jsonl.gz"
    raw.write_bytes(raw.read_bytes()[:-6])
    with pytest.raises(VersionMismatch):
        load_run(p)
    p = persist_run(_record(), tmp_path / "v")
    m = p / "manifest.json"
    m.write_text(m.read_text().replace('"format_version": 1', '"format_version": 2'))
    with pytest.raises(VersionMismatch):
        load_run(p)
    with pytest.raises(IoFailure):
        load_run(tmp_path / "nowhere")


def test_summaries_recomputable_after_load(run_path):
    rec = load_run(run_path)
    assert set(rec.manifest.tasks) == {"adaptability", "bandit", "reasoning", "safety"}
    a = compute_summaries(rec.raw, rec.manifest.tasks)
    b = compute_summaries(load_run(run_path).raw, rec.manifest.tasks)
    assert a == b and {"adaptability_summary", "ee_fits", "reasoning_accuracy", "sd3_scores"} <= set(a)


CAT = PoiCatalog(("Cafe", "Office", "Gym", "Park"))


def test_grid_cells_match_categories():
    grid = np.array([[0, 1, 2, 3, 0], [1, 1, 2, 0, 3]])
    svg = emit_adaptability_grid(AdaptTrajectory(grid, CAT, "ENTP"))
    cells = _rects(svg, "cell")
    assert len(cells) == 10
    for c in cells:
        idx = grid[int(c.get("data-period")), int(c.get("data-block"))]
        assert c.get("data-category") == CAT.categories[idx]
        assert c.get("fill") == category_color(idx)
    legend = {r.get("data-category"): r.get("fill") for r in _rects(svg, "legend")}
    assert legend == {c: category_color(i) for i, c in enumerate(CAT.categories)}
    assert len({category_color(i) for i in range(30)}) == 30


def test_constant_grid_single_colour_and_missing_hatched():
    svg = emit_adaptability_grid(AdaptTrajectory(np.full((7, 5), 2), CAT))
    assert {c.get("fill") for c in _rects(svg, "cell")} == {category_color(2)}
    assert len(_rects(svg, "legend")) == 1
    grid = np.full((3, 5), 1)
    grid[1, 4] = -1
    svg = emit_adaptability_grid(AdaptTrajectory(grid, CAT))
    miss = _rects(svg, "cell missing")
    assert len(miss) == 1 and miss[0].get("fill") == "url(#hatch)"
    assert (miss[0].get("data-period"), miss[0].get("data-block")) == ("1", "4")


def test_bar_lengths_proportional():
    values = {"ENFJ": 0.8, "INTP": 0.35, "ESTJ": 0.05}
    bars = [Bar(k, "flexibility", v) for k, v in values.items()] + [Bar("ENFJ", "stability", 0.0)]
    for rect in _rects(emit_bars(bars, vmax=1.0), "bar"):
        v = float(rect.get("data-value"))
        assert abs(float(rect.get("height")) - v * BAR_PLOT_HEIGHT) <= 1.0
    eq = _rects(emit_bars([Bar(c, "s", 0.4) for c in "ABCD"]), "bar")
    assert len({r.get("height") for r in eq}) == 1 and len({r.get("y") for r in eq}) == 1
    with pytest.raises(ValueError):
        emit_bars([])


def test_invalid_bars_dashed():
    svg = emit_bars([Bar("E/I", "first letter", None, False), Bar("E/I", "second letter", 0.6)])
    inv = _rects(svg, "bar invalid")
    assert len(inv) == 1 and inv[0].get("stroke-dasharray") and inv[0].get("data-value") is None


def _polygon(svg, cls):
    root = ET.fromstring(svg)
    poly = next(p for p in root.iter(f"{NS}polygon") if p.get("class") == cls)
    return [tuple(map(float, pt.split(","))) for pt in poly.get("points").split()]


def test_sd3_triangle_radii():
    s, b = Sd3Scores(4.2, 1.0, 2.5), Sd3Scores(3.1, 2.8, 2.4)
    svg = emit_sd3_triangles(s, b, "INFP")
    for cls, sc in (("persona", s), ("baseline", b)):
        pts = _polygon(svg, cls)
        centre = (160.0, 150.0)
        radii = [math.dist(p, centre) for p in pts]
        expected = [v / 5 * SD3_RADIUS for v in (sc.machiavellianism, sc.narcissism, sc.psychopathy)]
        assert radii == pytest.approx(expected, abs=1e-5)
    same = emit_sd3_triangles(b, b)
    assert _polygon(same, "persona") == _polygon(same, "baseline")


def _csv_numbers(path):
    out = set()
    for f in (path / "summary").glob("*.csv"):
        for row in csv.reader(f.open()):
            for c in row:
                try:
                    out.add(float(c))
                except ValueError:
                    pass
    return out


def test_report_bundle_and_chart_values_in_csv(run_path):
    bundle = emit_report(run_path)
    names = set(bundle.files)
    for want in ("charts/adaptability_ENFJ.svg", "charts/adaptability_bars.svg", "charts/ee_coefficients.svg",
                 "charts/sd3_ISTP.svg", "summary/ee_fits.csv", "summary/sd3_scores.csv"):
        assert want in names
    assert any(n.startswith("charts/reasoning_") for n in names)
    numbers = _csv_numbers(run_path)
    for f in (run_path / "charts").glob("*.svg"):
        text = f.read_text()
        for v in re.findall(r'data-value="([^"]+)"', text):
            assert float(v) in numbers, (f.name, v)
        for group in re.findall(r'data-scores="([^"]+)"', text):
            assert all(float(v) in numbers for v in group.split())


def test_report_is_deterministic(run_path):
    emit_report(run_path)
    first = {f: f.read_bytes() for f in run_path.rglob("*") if f.is_file() and "raw" not in f.parts}
    emit_report(run_path)
    second = {f: f.read_bytes() for f in run_path.rglob("*") if f.is_file() and "raw" not in f.parts}
    assert first == second
