"""Run persistence, summary tables and SVG charts.

Output tree for one run::

    runs/<config_hash>/manifest.json
                       raw/<name>.jsonl.gz
                       summary/<name>.csv
                       charts/<name>.svg

Raw files are the source of truth; every summary and chart is recomputed from
them by :func:`compute_summaries` and :func:`emit_report`.
"""

from __future__ import annotations

import colorsys
import csv
import gzip
import io
import json
import math
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from xml.sax.saxutils import escape, quoteattr

from .adaptability import TIME_BLOCKS, AdaptTrajectory, PoiCatalog, flexibility, stability, summarize_adaptability
from .bandit import read_trajectory
from .core import AXIS_LABELS, RunManifest
from .inference import dimension_proportions, fit_events, replay_beliefs
from .reasoning import McqResult, accuracy_by_category
from .safety import IncompleteResponses, Sd3Item, Sd3Scores, compare_to_baseline, score_sd3

__all__ = [
    "FORMAT_VERSION",
    "IoFailure",
    "ReportBundle",
    "RunRecord",
    "Table",
    "VersionMismatch",
    "compute_summaries",
    "emit_adaptability_grid",
    "emit_bars",
    "emit_report",
    "emit_sd3_triangles",
    "load_run",
    "persist_run",
]

FORMAT_VERSION = 1


class IoFailure(OSError):
    pass


class VersionMismatch(ValueError):
    pass


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        self.rows = [tuple(r) for r in self.rows]

    def dicts(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]


@dataclass
class RunRecord:
    manifest: RunManifest
    raw: dict[str, list[dict]] = field(default_factory=dict)
    summaries: dict[str, Table] = field(default_factory=dict)


@dataclass(frozen=True)
class ReportBundle:
    directory: Path
    files: tuple[str, ...]
    format_version: int = FORMAT_VERSION


# ---------------------------------------------------------------- persistence

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_cell(s: str):
    if s == "":
        return None
    if s in ("True", "False"):
        return s == "True"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def table_to_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def table_from_csv(text: str) -> Table:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty CSV")
    return Table(tuple(rows[0]), [tuple(_parse_cell(c) for c in r) for r in rows[1:]])


def _gzip_bytes(text: str) -> bytes:
    buf = io.BytesIO()
    with gzip.GzipFile(filename="", mode="wb", fileobj=buf, mtime=0) as gz:
        gz.write(text.encode("utf-8"))
    return buf.getvalue()


def _jsonl(lines: Iterable[dict]) -> str:
    return "".join(json.dumps(d, sort_keys=True, ensure_ascii=False) + "\n" for d in lines)


def _write(path: Path, data: bytes | str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(data, str):
            data = data.encode("utf-8")
        path.write_bytes(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def run_dir(runs_root: str | Path, manifest: RunManifest) -> Path:
    return Path(runs_root) / manifest.config_hash


def persist_run(record: RunRecord, runs_root: str | Path) -> Path:
    """Write manifest, compressed raw files and summary CSVs; return the run directory."""
    out = run_dir(runs_root, record.manifest)
    _write(out / "manifest.json", json.dumps(record.manifest.to_dict(), sort_keys=True, indent=2) + "\n")
    for name, lines in sorted(record.raw.items()):
        _write(out / "raw" / f"{name}.jsonl.gz", _gzip_bytes(_jsonl(lines)))
    for name, table in sorted(record.summaries.items()):
        _write(out / "summary" / f"{name}.csv", table_to_csv(table))
    return out


def load_run(path: str | Path) -> RunRecord:
    path = Path(path)
    try:
        manifest_d = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise IoFailure(f"no manifest in {path}") from exc
    except ValueError as exc:
        raise VersionMismatch(f"unreadable manifest in {path}: {exc}") from exc
    if manifest_d.get("format_version") != FORMAT_VERSION:
        raise VersionMismatch(f"run format {manifest_d.get('format_version')!r}, expected {FORMAT_VERSION}")
    manifest = RunManifest.from_dict(manifest_d)
    raw = {}
    for f in sorted((path / "raw").glob("*.jsonl.gz")):
        try:
            text = gzip.decompress(f.read_bytes()).decode("utf-8")
            raw[f.name[: -len(".jsonl.gz")]] = [json.loads(l) for l in text.splitlines() if l.strip()]
        except (OSError, EOFError, zlib.error, ValueError) as exc:
            raise VersionMismatch(f"corrupt raw file {f.name}: {exc}") from exc
    summaries = {}
    for f in sorted((path / "summary").glob("*.csv")):
        summaries[f.stem] = table_from_csv(f.read_text(encoding="utf-8"))
    return RunRecord(manifest, raw, summaries)


# ---------------------------------------------------------------- raw builders

def adaptability_raw(catalog: PoiCatalog, trajectories: Sequence[AdaptTrajectory]) -> list[dict]:
    header = {"kind": "adaptability-header", "format_version": FORMAT_VERSION,
              "catalog": list(catalog.categories), "blocks": [b.id for b in TIME_BLOCKS]}
    return [header] + [t.to_json() for t in trajectories]


def bandit_raw(trajectory) -> list[dict]:
    from .bandit import write_trajectory

    buf = io.StringIO()
    write_trajectory(buf, trajectory)
    return [json.loads(l) for l in buf.getvalue().splitlines()]


def reasoning_raw(results: Sequence[McqResult]) -> list[dict]:
    return [{"kind": "reasoning-header", "format_version": FORMAT_VERSION}] + [asdict(r) for r in results]


def safety_raw(inventory: Sequence[Sd3Item], baseline: Sd3Scores, responses) -> list[dict]:
    header = {"kind": "safety-header", "format_version": FORMAT_VERSION,
              "inventory": [asdict(i) for i in inventory], "baseline": baseline.as_dict()}
    return [header] + [asdict(r) for r in responses]


# ---------------------------------------------------------------- summaries

def _adaptability_from_raw(lines):
    catalog = PoiCatalog(tuple(lines[0]["catalog"]))
    trajs = [AdaptTrajectory.from_json(d, catalog) for d in lines[1:]]
    return catalog, trajs


def summarize_adaptability_raw(lines) -> dict[str, Table]:
    _, trajs = _adaptability_from_raw(lines)
    by_persona: dict[str, list] = {}
    for t in trajs:
        by_persona.setdefault(t.persona, []).append(t)
    summ = Table(("persona", "flexibility_mean", "flexibility_std", "stability_mean", "stability_std",
                  "n", "n_partial"))
    runs = Table(("persona", "repeat", "flexibility", "stability", "partial"))
    cells = Table(("persona", "repeat", "period", "block", "category"))
    for persona in sorted(by_persona):
        s = summarize_adaptability(by_persona[persona], persona)
        summ.rows.append((persona, s.flexibility_mean, s.flexibility_std, s.stability_mean,
                          s.stability_std, s.n, s.n_partial))
        for t in sorted(by_persona[persona], key=lambda t: t.repeat):
            runs.rows.append((persona, t.repeat, flexibility(t), stability(t), t.partial))
            for p, row in enumerate(t.names()):
                for b, cat in enumerate(row):
                    cells.rows.append((persona, t.repeat, p, TIME_BLOCKS[b].id, cat))
    return {"adaptability_summary": summ, "adaptability_runs": runs, "adaptability_grid": cells}


def summarize_bandit_raw(raw: Mapping[str, list[dict]]) -> dict[str, Table]:
    fits = {}
    for name in sorted(k for k in raw if k.startswith("bandit_")):
        traj = read_trajectory(json.dumps(d) for d in raw[name])
        fits[traj.persona] = fit_events(replay_beliefs(traj))
    fit_table = Table(("persona", "w1", "w2", "loglik", "n_events", "converged", "ridge_used"))
    for persona in sorted(fits):
        f = fits[persona]
        fit_table.rows.append((persona, f.w1, f.w2, f.log_likelihood, f.n_events, f.converged, f.ridge_used))
    out = {"ee_fits": fit_table}
    if len(fits) == 16:
        dims = Table(("axis", "group", "coefficient", "mean", "proportion", "valid"))
        for axis, d in dimension_proportions(fits).items():
            for coef, split in (("exploitation", d.exploitation), ("exploration", d.exploration)):
                dims.rows.append((AXIS_LABELS[axis], d.group_a, coef, split.group_a_mean, split.proportion_a, split.valid))
                dims.rows.append((AXIS_LABELS[axis], d.group_b, coef, split.group_b_mean, split.proportion_b, split.valid))
        out["ee_dimensions"] = dims
    return out


def summarize_reasoning_raw(lines) -> dict[str, Table]:
    results = [McqResult(**d) for d in lines[1:]]
    res = Table(("persona", "subject", "category", "item_id", "extracted", "gold", "correct"))
    for r in results:
        res.rows.append((r.persona, r.subject, r.category, r.item_id, r.extracted, r.gold, r.correct))
    acc = Table(("persona", "category", "accuracy", "n_items", "n_invalid"))
    for (persona, cat), a in accuracy_by_category(results).items():
        acc.rows.append((persona, cat, a.accuracy, a.n_items, a.n_invalid))
    return {"reasoning_results": res, "reasoning_accuracy": acc}


def summarize_safety_raw(lines) -> dict[str, Table]:
    header = lines[0]
    inventory = [Sd3Item(**d) for d in header["inventory"]]
    baseline = Sd3Scores(**header["baseline"])
    by_persona: dict[str, dict[int, int | None]] = {}
    for d in lines[1:]:
        by_persona.setdefault(d["persona"], {})[d["index"]] = d["value"]
    cols = ("persona", "machiavellianism", "narcissism", "psychopathy",
            "delta_machiavellianism", "delta_narcissism", "delta_psychopathy", "complete", "missing_items")
    t = Table(cols)
    b = baseline.as_dict()
    t.rows.append(("baseline", b["machiavellianism"], b["narcissism"], b["psychopathy"], 0.0, 0.0, 0.0, True, None))
    for persona in sorted(by_persona):
        try:
            s = score_sd3(by_persona[persona], inventory)
        except IncompleteResponses as exc:
            t.rows.append((persona, None, None, None, None, None, None, False,
                           " ".join(str(i) for i in exc.missing)))
            continue
        d = compare_to_baseline(s, baseline)
        sd = s.as_dict()
        t.rows.append((persona, sd["machiavellianism"], sd["narcissism"], sd["psychopathy"],
                       d["machiavellianism"], d["narcissism"], d["psychopathy"], True, None))
    return {"sd3_scores": t}


def compute_summaries(raw: Mapping[str, list[dict]], tasks: Iterable[str] | None = None) -> dict[str, Table]:
    tasks = set(tasks) if tasks is not None else {"adaptability", "bandit", "reasoning", "safety"}
    out = {}
    if "adaptability" in tasks and "adaptability" in raw:
        out.update(summarize_adaptability_raw(raw["adaptability"]))
    if "bandit" in tasks and any(k.startswith("bandit_") for k in raw):
        out.update(summarize_bandit_raw(raw))
    if "reasoning" in tasks and "reasoning" in raw:
        out.update(summarize_reasoning_raw(raw["reasoning"]))
    if "safety" in tasks and "safety" in raw:
        out.update(summarize_safety_raw(raw["safety"]))
    return out


# ---------------------------------------------------------------- SVG charts

def _svg(width: int, height: int, body: Sequence[str], defs: str = "") -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">')
    parts = [head]
    if defs:
        parts.append(f"<defs>{defs}</defs>")
    parts.extend(body)
    parts.append("</svg>\n")
    return "\n".join(parts)


def category_color(index: int) -> str:
    """Distinct, stable colour per category index (golden-angle hue walk)."""
    h = (index * 0.618033988749895) % 1.0
    l = 0.45 + 0.15 * ((index // 7) % 2)
    r, g, b = colorsys.hls_to_rgb(h, l, 0.65)
    return f"#{round(r * 255):02x}{round(g * 255):02x}{round(b * 255):02x}"


_HATCH = ('<pattern id="hatch" patternUnits="userSpaceOnUse" width="6" height="6">'
          '<rect width="6" height="6" fill="#ffffff"/>'
          '<path d="M0,6 L6,0" stroke="#888888" stroke-width="1"/></pattern>')


def emit_adaptability_grid(traj: AdaptTrajectory, title: str = "") -> str:
    """Colour-cell grid: x = day (period), y = time block, one colour per category."""
    cell, left, top = 36, 80, 30
    P, T = traj.periods, traj.blocks
    used = sorted({int(i) for i in traj.grid.ravel() if i >= 0})
    legend_h = 16 * len(used)
    width = left + P * cell + 260
    height = max(top + T * cell + 40, top + legend_h + 20)
    body = [f'<text x="{left}" y="18">{escape(title or traj.persona)}</text>']
    for b in range(T):
        y = top + b * cell
        body.append(f'<text x="{left - 6}" y="{y + cell / 2 + 4}" text-anchor="end">{TIME_BLOCKS[b].id}</text>')
        for p in range(P):
            x = left + p * cell
            idx = int(traj.grid[p, b])
            if idx < 0:
                body.append(f'<rect class="cell missing" x="{x}" y="{y}" width="{cell}" height="{cell}" '
                            f'fill="url(#hatch)" stroke="#ffffff" data-period="{p}" data-block="{b}"/>')
            else:
                name = traj.catalog.categories[idx]
                body.append(f'<rect class="cell" x="{x}" y="{y}" width="{cell}" height="{cell}" '
                            f'fill="{category_color(idx)}" stroke="#ffffff" data-period="{p}" data-block="{b}" '
                            f'data-category={quoteattr(name)}/>')
    for p in range(P):
        body.append(f'<text x="{left + p * cell + cell / 2}" y="{top + T * cell + 14}" '
                    f'text-anchor="middle">{p + 1}</text>')
    lx = left + P * cell + 20
    for k, idx in enumerate(used):
        y = top + 16 * k
        name = traj.catalog.categories[idx]
        body.append(f'<rect class="legend" x="{lx}" y="{y}" width="12" height="12" fill="{category_color(idx)}" '
                    f'data-category={quoteattr(name)}/>')
        body.append(f'<text x="{lx + 18}" y="{y + 10}">{escape(name)}</text>')
    return _svg(width, height, body, _HATCH)


@dataclass(frozen=True)
class Bar:
    group: str
    series: str
    value: float | None
    valid: bool = True


BAR_PLOT_HEIGHT = 200.0


def emit_bars(bars: Sequence[Bar], title: str = "", vmax: float = 1.0) -> str:
    """Grouped bar chart; bar height is ``value / vmax * BAR_PLOT_HEIGHT`` pixels.

    Invalid bars are drawn as dashed outlines at full height and carry no value.
    """
    if not bars:
        raise ValueError("nothing to plot")
    groups = list(dict.fromkeys(b.group for b in bars))
    series = list(dict.fromkeys(b.series for b in bars))
    bw, gap, left, top = 14, 12, 50, 30
    H = BAR_PLOT_HEIGHT
    gw = bw * len(series) + gap
    width = left + gw * len(groups) + 160
    height = int(top + H + 60)
    base = top + H
    body = [f'<text x="{left}" y="18">{escape(title)}</text>',
            f'<line x1="{left}" y1="{base}" x2="{left + gw * len(groups)}" y2="{base}" stroke="#000000"/>']
    for tick in range(5):
        v = vmax * tick / 4
        y = base - H * tick / 4
        body.append(f'<text x="{left - 4}" y="{y + 4}" text-anchor="end">{v:.2f}</text>')
    for gi, g in enumerate(groups):
        x0 = left + gi * gw
        body.append(f'<text x="{x0 + gw / 2 - gap / 2}" y="{base + 14}" text-anchor="middle">{escape(g)}</text>')
        for si, s in enumerate(series):
            match = [b for b in bars if b.group == g and b.series == s]
            if not match:
                continue
            b = match[0]
            x = x0 + si * bw
            color = category_color(si)
            if not b.valid or b.value is None:
                body.append(f'<rect class="bar invalid" x="{x}" y="{top}" width="{bw - 2}" height="{H}" '
                            f'fill="none" stroke="{color}" stroke-dasharray="4,3" '
                            f'data-group={quoteattr(g)} data-series={quoteattr(s)}/>')
                continue
            h = max(0.0, b.value) / vmax * H
            body.append(f'<rect class="bar" x="{x}" y="{base - h:.4f}" width="{bw - 2}" height="{h:.4f}" '
                        f'fill="{color}" data-group={quoteattr(g)} data-series={quoteattr(s)} '
                        f'data-value="{b.value!r}"/>')
    lx = left + gw * len(groups) + 20
    for si, s in enumerate(series):
        body.append(f'<rect x="{lx}" y="{top + 16 * si}" width="12" height="12" fill="{category_color(si)}"/>')
        body.append(f'<text x="{lx + 18}" y="{top + 16 * si + 10}">{escape(s)}</text>')
    return _svg(int(width), height, body)


SD3_RADIUS = 100.0
_SD3_ORDER = ("machiavellianism", "narcissism", "psychopathy")


def _triangle(scores: Mapping[str, float], cx: float, cy: float) -> list[tuple[float, float]]:
    pts = []
    for k, trait in enumerate(_SD3_ORDER):
        ang = math.radians(-90 + 120 * k)
        r = scores[trait] / 5.0 * SD3_RADIUS
        pts.append((cx + r * math.cos(ang), cy + r * math.sin(ang)))
    return pts


def emit_sd3_triangles(scores: Sd3Scores, baseline: Sd3Scores, title: str = "") -> str:
    """Three-axis radar: vertex radius = score / 5 * SD3_RADIUS; baseline blue, persona red."""
    cx, cy = 160.0, 150.0
    body = [f'<text x="10" y="18">{escape(title)}</text>']
    for k, trait in enumerate(_SD3_ORDER):
        ang = math.radians(-90 + 120 * k)
        x, y = cx + SD3_RADIUS * math.cos(ang), cy + SD3_RADIUS * math.sin(ang)
        body.append(f'<line x1="{cx}" y1="{cy}" x2="{x:.4f}" y2="{y:.4f}" stroke="#bbbbbb"/>')
        body.append(f'<text x="{x:.1f}" y="{y + (14 if k else -6):.1f}" text-anchor="middle">{trait}</text>')
    for name, s, color in (("baseline", baseline, "#1f4fd8"), ("persona", scores, "#d62728")):
        pts = _triangle(s.as_dict(), cx, cy)
        attr = " ".join(f"{x:.6f},{y:.6f}" for x, y in pts)
        vals = " ".join(repr(s.as_dict()[t]) for t in _SD3_ORDER)
        body.append(f'<polygon class="{name}" points="{attr}" fill="{color}" fill-opacity="0.2" '
                    f'stroke="{color}" stroke-width="2" data-scores="{vals}"/>')
    return _svg(320, 300, body)


def emit_report(run_path: str | Path) -> ReportBundle:
    """Recompute summaries from raw files and write ``summary/*.csv`` and ``charts/*.svg``."""
    run_path = Path(run_path)
    record = load_run(run_path)
    summaries = compute_summaries(record.raw, record.manifest.tasks)
    files = []
    for name, table in sorted(summaries.items()):
        _write(run_path / "summary" / f"{name}.csv", table_to_csv(table))
        files.append(f"summary/{name}.csv")
    charts: dict[str, str] = {}

    if "adaptability" in record.raw:
        _, trajs = _adaptability_from_raw(record.raw["adaptability"])
        for t in trajs:
            if t.repeat == 0:
                charts[f"adaptability_{t.persona}"] = emit_adaptability_grid(t)
        rows = summaries["adaptability_summary"].dicts()
        bars = [Bar(r["persona"], m, r[f"{m}_mean"]) for r in rows for m in ("flexibility", "stability")]
        charts["adaptability_bars"] = emit_bars(bars, "flexibility / stability (mean)")

    if "ee_fits" in summaries:
        rows = summaries["ee_fits"].dicts()
        vmax = max([abs(r[c]) for r in rows for c in ("w1", "w2")] + [1e-12])
        charts["ee_coefficients"] = emit_bars(
            [Bar(r["persona"], c, r[c], r[c] >= 0) for r in rows for c in ("w1", "w2")],
            "probit coefficients", vmax)
    if "ee_dimensions" in summaries:
        rows = summaries["ee_dimensions"].dicts()
        for coef in ("exploration", "exploitation"):
            sub = [r for r in rows if r["coefficient"] == coef]
            bars = [Bar(r["axis"], "first letter" if i % 2 == 0 else "second letter", r["proportion"], r["valid"])
                    for i, r in enumerate(sub)]
            charts[f"ee_{coef}_proportion"] = emit_bars(bars, f"{coef} proportion by MBTI axis")

    if "reasoning_accuracy" in summaries:
        rows = summaries["reasoning_accuracy"].dicts()
        for cat in sorted({r["category"] for r in rows}):
            charts[f"reasoning_{cat}"] = emit_bars(
                [Bar(r["persona"], "accuracy", r["accuracy"]) for r in rows if r["category"] == cat],
                f"{cat} accuracy")

    if "sd3_scores" in summaries:
        rows = summaries["sd3_scores"].dicts()
        base = next(r for r in rows if r["persona"] == "baseline")
        baseline = Sd3Scores(base["machiavellianism"], base["narcissism"], base["psychopathy"])
        for r in rows:
            if r["persona"] == "baseline" or not r["complete"]:
                continue
            s = Sd3Scores(r["machiavellianism"], r["narcissism"], r["psychopathy"])
            charts[f"sd3_{r['persona']}"] = emit_sd3_triangles(s, baseline, r["persona"])

    for name, svg in sorted(charts.items()):
        _write(run_path / "charts" / f"{name}.svg", svg)
        files.append(f"charts/{name}.svg")
    return ReportBundle(run_path, tuple(files))
