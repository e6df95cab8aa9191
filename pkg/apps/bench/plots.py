"""
Gráficos SVG log-log de resíduo por iteração, com envelopes teóricos.
"""

import logging
from collections.abc import Mapping, Sequence
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from apps.methods.models import RunRecord  # noqa: E402

logger = logging.getLogger(__name__)

# Texto do SVG como <text>, sem contornos
plt.rcParams["svg.fonttype"] = "none"

Envelope = Sequence[tuple[int, float]]


def _positive(points):
    return [(t, v) for t, v in points if t >= 1 and v is not None and v == v and v > 0]


def emit_plots(
    records: Sequence[RunRecord],
    out_dir: str | Path,
    envelopes: Sequence[Mapping[str, Envelope]] | None = None,
    names: Sequence[str] | None = None,
) -> list[Path]:
    """
    Um SVG por registro. envelopes[i] mapeia rótulo → pontos (t, valor) a
    sobrepor ao registro i. Séries sem resíduo positivo são puladas.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for idx, record in enumerate(records):
        name = names[idx] if names else f"{record.method}-{idx}"
        series = _positive(zip([row.t for row in record.rows], record.best_residuals(), strict=True))
        if not series:
            logger.warning("Registro %s sem resíduos positivos; gráfico ignorado.", name)
            continue

        fig, ax = plt.subplots(figsize=(6, 5))
        ts, vs = zip(*series, strict=True)
        ax.plot(ts, vs, marker="o", markersize=3, label=f"{record.method} (observado)")
        for label, points in (envelopes[idx] if envelopes else {}).items():
            points = _positive(points)
            if points:
                ets, evs = zip(*points, strict=True)
                ax.plot(ets, evs, linestyle="--", label=label)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("iteração t")
        ax.set_ylabel("resíduo f(x_t) − f*")
        ax.set_title(name)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()

        path = out_dir / f"{name}.svg"
        fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
        logger.info("Gráfico gravado: %s", path)
    return written


def envelopes_from_report(report) -> dict[str, list[tuple[int, float]]]:
    """Curvas superior e inferior de um BoundReport."""
    return {
        "envelope superior": [(row.t, row.upper) for row in report.rows if row.upper is not None],
        "envelope inferior": [(row.t, row.lower) for row in report.rows if row.lower is not None],
    }
