"""Render sweep-result CSVs as rate-versus-variable figures.

Reads the CSV contract of the discojam CLI (one row per grid value,
scenario, and user) and draws one solid line per scenario with a shaded
95% confidence band, plus a dashed line for every scenario that carries
a closed-form bound column. All statistics come in through the file;
nothing is recomputed here.
"""

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # file output only; pick the backend before pyplot loads
matplotlib.rcParams["svg.hashsalt"] = "discoplot"  # deterministic svg ids

import matplotlib.pyplot as plt

CSV_COLUMNS = [
    "experiment", "sweep_var", "sweep_value", "scenario", "user",
    "mean_rate_bps_hz", "ci_half", "bound_bps_hz", "trials", "seed",
]

# Extensions whose writers embed no timestamps, keeping renders
# byte-stable for a given input.
_FORMATS = (".png", ".svg")

_AXIS_LABELS = {
    "p_d_dbm": "transmit power (dBm)",
    "n_dirs_elements": "reflector elements",
    "phase_bits": "phase quantization bits",
    "bs_dirs_distance_m": "BS to reflector distance (m)",
    "n_antennas": "BS antennas",
    "n_users": "users",
}

_KNOWN_STYLES = {
    "nojam_zf": {"color": "#1f77b4", "marker": "o"},
    "nojam_mrc": {"color": "#17becf", "marker": "s"},
    "dirs_zf": {"color": "#d62728", "marker": "o"},
    "dirs_mrc": {"color": "#ff7f0e", "marker": "s"},
    "aj_neg4dbm": {"color": "#2ca02c", "marker": "^"},
    "aj_pos4dbm": {"color": "#98df8a", "marker": "v"},
    "pj_rcg": {"color": "#9467bd", "marker": "D"},
}
_FALLBACK_COLORS = ("#7f7f7f", "#8c564b", "#e377c2", "#bcbd22")


class SchemaError(ValueError):
    """The CSV does not match the documented sweep-result schema."""


class SelectionError(ValueError):
    """The inputs parsed but selected no plottable rows."""


@dataclass(frozen=True)
class FigureSpec:
    """Everything one render needs.

    csv_paths may list several files (e.g. per-detector runs of the same
    experiment); their rows are concatenated before selection. user picks
    which per-user curve to draw, "avg" being the per-scenario average
    row the sweep runner always emits.
    """

    csv_paths: tuple
    out_path: str
    experiment: str
    user: str = "avg"
    x_label: str | None = None
    y_label: str = "ergodic rate (bits/s/Hz)"
    log_x: bool = False
    log_y: bool = False
    title: str | None = None
    styles: dict | None = field(default=None)


@dataclass(frozen=True)
class RenderResult:
    path: Path
    legend: tuple


def _number(raw: dict, column: str, line: int) -> float:
    try:
        return float(raw[column])
    except ValueError:
        raise SchemaError(
            f"bad numeric value {raw[column]!r} in column {column} "
            f"(data row {line})"
        ) from None


def read_rows(path) -> list:
    """Parse one results CSV, skipping # comment lines."""
    try:
        with open(path, newline="") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
    except OSError as exc:
        raise SelectionError(f"cannot read csv file: {exc}") from None
    reader = csv.DictReader(lines)
    missing = [c for c in CSV_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise SchemaError(f"csv is missing required column(s): {', '.join(missing)}")
    rows = []
    for i, raw in enumerate(reader, start=1):
        rows.append({
            "experiment": raw["experiment"],
            "sweep_var": raw["sweep_var"],
            "sweep_value": _number(raw, "sweep_value", i),
            "scenario": raw["scenario"],
            "user": raw["user"],
            "mean": _number(raw, "mean_rate_bps_hz", i),
            "ci": _number(raw, "ci_half", i),
            "bound": _number(raw, "bound_bps_hz", i) if raw["bound_bps_hz"] else None,
        })
    return rows


def default_styles(scenarios) -> dict:
    """Fixed styles for the known scenario tokens, a deterministic
    fallback palette for anything else."""
    styles = {}
    spare = 0
    for name in sorted(scenarios):
        if name in _KNOWN_STYLES:
            styles[name] = _KNOWN_STYLES[name]
        else:
            color = _FALLBACK_COLORS[spare % len(_FALLBACK_COLORS)]
            styles[name] = {"color": color, "marker": "x"}
            spare += 1
    return styles


def build_figure(spec: FigureSpec):
    """Assemble the matplotlib figure; returns (figure, legend labels).

    Split from render so tests can inspect the artists without decoding
    an image.
    """
    rows = []
    for path in spec.csv_paths:
        rows.extend(read_rows(path))
    sel = [r for r in rows if r["experiment"] == spec.experiment
           and r["user"] == spec.user]
    if not sel:
        raise SelectionError(
            f"no rows for experiment {spec.experiment!r} and user "
            f"{spec.user!r} in: {', '.join(str(p) for p in spec.csv_paths)}"
        )
    sweep_vars = sorted({r["sweep_var"] for r in sel})
    if len(sweep_vars) != 1:
        raise SchemaError(
            f"selected rows mix sweep_var values {sweep_vars}; "
            "plot one experiment per figure"
        )
    scenarios = sorted({r["scenario"] for r in sel})
    styles = spec.styles if spec.styles is not None else default_styles(scenarios)
    unstyled = [s for s in scenarios if s not in styles]
    if unstyled:
        raise SelectionError(
            f"no style for scenario(s): {', '.join(unstyled)}"
        )

    fig, ax = plt.subplots(figsize=(6.4, 4.4), dpi=120)
    for name in scenarios:
        pts = sorted((r for r in sel if r["scenario"] == name),
                     key=lambda r: r["sweep_value"])
        x = [r["sweep_value"] for r in pts]
        y = [r["mean"] for r in pts]
        ci = [r["ci"] for r in pts]
        st = styles[name]
        ax.plot(x, y, label=name, color=st["color"], marker=st.get("marker"),
                markersize=3.5, linewidth=1.4)
        ax.fill_between(x, [m - c for m, c in zip(y, ci)],
                        [m + c for m, c in zip(y, ci)],
                        color=st["color"], alpha=0.22, linewidth=0)
        bounded = [(r["sweep_value"], r["bound"]) for r in pts
                   if r["bound"] is not None]
        if bounded:
            ax.plot([v for v, _ in bounded], [b for _, b in bounded],
                    linestyle="--", color=st["color"], linewidth=1.1,
                    alpha=0.85, label=f"{name} bound")

    ax.set_xlabel(spec.x_label or _AXIS_LABELS.get(sweep_vars[0], sweep_vars[0]))
    ax.set_ylabel(spec.y_label)
    if spec.log_x:
        ax.set_xscale("log")
    if spec.log_y:
        ax.set_yscale("log")
    if spec.title:
        ax.set_title(spec.title)
    ax.grid(alpha=0.3, linewidth=0.5)
    legend = ax.legend(fontsize=8)
    fig.tight_layout()
    labels = tuple(t.get_text() for t in legend.get_texts())
    return fig, labels


def render(spec: FigureSpec) -> RenderResult:
    """Write the figure file for the spec; returns its path and legend."""
    out = Path(spec.out_path)
    if out.suffix.lower() not in _FORMATS:
        raise SelectionError(
            f"unsupported output format {out.suffix!r}; use one of: "
            f"{', '.join(_FORMATS)}"
        )
    fig, labels = build_figure(spec)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        if out.suffix.lower() == ".png":
            # the default Software tag carries the backend version; pin it
            fig.savefig(out, metadata={"Software": "discoplot"})
        else:
            fig.savefig(out, metadata={"Date": None})
    finally:
        plt.close(fig)
    return RenderResult(path=out, legend=labels)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="render a sweep-result CSV as a rate figure",
    )
    parser.add_argument("--csv", required=True, action="append",
                        help="input results CSV (repeatable)")
    parser.add_argument("--experiment", required=True,
                        help="experiment id to select rows for")
    parser.add_argument("--out", required=True,
                        help="output image path (.png or .svg)")
    parser.add_argument("--user", default="avg",
                        help='user column to plot (default "avg")')
    parser.add_argument("--logx", action="store_true", help="log x axis")
    parser.add_argument("--logy", action="store_true", help="log y axis")
    parser.add_argument("--title", default=None, help="figure title")
    args = parser.parse_args(argv)

    spec = FigureSpec(
        csv_paths=tuple(args.csv), out_path=args.out,
        experiment=args.experiment, user=args.user,
        log_x=args.logx, log_y=args.logy, title=args.title,
    )
    try:
        result = render(spec)
    except (SchemaError, SelectionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(result.path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
