"""Report emission: delimited tables, field dumps, figures, manifest.

All numeric table entries are written with 17 significant digits so a
round trip through the CSV reproduces the binary doubles exactly, and
repeated runs with the same seed produce byte-identical tables.  Figures
are rendered straight to PNG files through matplotlib's object API (no
interactive backend involved).
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

from . import __version__
from .mesh import Mesh, build_torus_mesh
from .montecarlo import IMPLICIT, EnsembleReport

__all__ = ["RunManifest", "emit_report"]


@dataclass
class RunManifest:
    version: str
    created_utc: str
    n_paths_completed: int
    n_paths_failed: int
    failures: list
    outputs: list  # [{"path": str, "bytes": int, "sha256": str}]


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _tau_tag(tau: float) -> str:
    return f"{tau:g}"


def _write_csv(path: Path, header: list, rows) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _line_indices(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Grid nodes along the horizontal mid-line (the row nearest y = 0)."""
    nx, ny = mesh.n_cells_x, mesh.n_cells_y
    ys = mesh.nodes[:nx * ny:nx, 1]
    j = int(np.argmin(np.abs(ys)))
    idx = j * nx + np.arange(nx)
    return idx, mesh.nodes[idx, 0]


def _grid_image(mesh: Mesh, field: np.ndarray) -> np.ndarray:
    nx, ny = mesh.n_cells_x, mesh.n_cells_y
    return field[: nx * ny].reshape(ny, nx)


def emit_report(report: EnsembleReport, outdir, figures: bool = True) -> RunManifest:
    """Write every table, dump and figure for an ensemble into ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = report.config
    mesh = build_torus_mesh(cfg.lx, cfg.ly, cfg.n_cells_x, cfg.n_cells_y)
    written: list[Path] = []

    def _track(path: Path) -> Path:
        written.append(path)
        return path

    with open(_track(outdir / "config.json"), "w") as handle:
        json.dump(cfg.to_dict(), handle, indent=2, sort_keys=True)
        handle.write("\n")

    # refinement tables: error against the scheme's own finest run
    for scheme, by_tau in sorted(report.self_rms.items()):
        rates = dict(report.self_eoc.get(scheme, []))
        rows = [
            [_fmt(tau), _fmt(rms), _fmt(rates[tau]) if tau in rates else ""]
            for tau, rms in sorted(by_tau.items())
        ]
        _write_csv(
            _track(outdir / f"eoc_{scheme}.csv"),
            ["tau", "rms_vs_reference", "eoc"],
            rows,
        )

    # comparison tables: error against the implicit reference at equal tau
    for scheme, by_tau in sorted(report.cross_rms.items()):
        rates = dict(report.cross_eoc.get(scheme, []))
        rows = [
            [_fmt(tau), _fmt(rms), _fmt(rates[tau]) if tau in rates else ""]
            for tau, rms in sorted(by_tau.items())
        ]
        _write_csv(
            _track(outdir / f"compare_{scheme}.csv"),
            ["tau", "rms_vs_implicit", "eoc"],
            rows,
        )

    for scheme, by_tau in sorted(report.energy_series.items()):
        for tau, series in sorted(by_tau.items()):
            rows = [[_fmt(v) for v in row] for row in series]
            _write_csv(
                _track(outdir / f"energy_{scheme}_{_tau_tag(tau)}.csv"),
                ["t", "modified_energy", "total_energy", "sav_error"],
                rows,
            )

    line_idx, line_x = _line_indices(mesh)
    for t in cfg.checkpoint_times:
        header = ["x"]
        columns = [line_x]
        for scheme, by_tau in sorted(report.mean_fields.items()):
            for tau, by_time in sorted(by_tau.items()):
                if t in by_time:
                    header.append(f"{scheme}_tau{_tau_tag(tau)}")
                    columns.append(by_time[t][line_idx])
        if len(columns) == 1:
            continue
        rows = [[_fmt(col[i]) for col in columns] for i in range(len(line_x))]
        _write_csv(_track(outdir / f"lineplot_{t:g}.csv"), header, rows)

    for scheme, by_tau in sorted(report.mean_fields.items()):
        for tau, by_time in sorted(by_tau.items()):
            for t, field in sorted(by_time.items()):
                stem = f"field_mean_{scheme}_tau{_tau_tag(tau)}_t{t:g}"
                with open(_track(outdir / f"{stem}.f64"), "wb") as handle:
                    handle.write(np.asarray(field, dtype="<f8").tobytes())
                meta = [
                    ["node_count", str(field.shape[0])],
                    ["n_cells_x", str(cfg.n_cells_x)],
                    ["n_cells_y", str(cfg.n_cells_y)],
                    ["lx", _fmt(cfg.lx)],
                    ["ly", _fmt(cfg.ly)],
                    ["scheme", scheme],
                    ["tau", _fmt(tau)],
                    ["time", _fmt(t)],
                    ["dtype", "float64"],
                    ["byte_order", "little"],
                    ["layout", "grid nodes row-major, then cell centers row-major"],
                ]
                _write_csv(_track(outdir / f"{stem}.meta.csv"), ["key", "value"], meta)

    if figures:
        written.extend(_render_figures(report, mesh, outdir))

    manifest = RunManifest(
        version=__version__,
        created_utc=datetime.now(timezone.utc).isoformat(),
        n_paths_completed=report.n_paths_completed,
        n_paths_failed=len(report.failures),
        failures=[dataclasses.asdict(f) for f in report.failures],
        outputs=[],
    )
    for path in sorted(written):
        data = path.read_bytes()
        manifest.outputs.append(
            {
                "path": path.name,
                "bytes": len(data),
                "sha256": hashlib.sha256(data).hexdigest(),
            }
        )
    with open(outdir / "manifest.json", "w") as handle:
        json.dump(dataclasses.asdict(manifest), handle, indent=2)
        handle.write("\n")
    return manifest


def _render_figures(report: EnsembleReport, mesh: Mesh, outdir: Path) -> list:
    """PNG companions to the delimited tables."""
    written: list[Path] = []
    cfg = report.config

    def _save(fig: Figure, name: str) -> None:
        path = outdir / name
        fig.savefig(path, dpi=140, bbox_inches="tight")
        written.append(path)

    def _loglog(by_scheme: dict, title: str, name: str) -> None:
        if not any(by_scheme.values()):
            return
        fig = Figure(figsize=(5.0, 3.8))
        ax = fig.subplots()
        for scheme, by_tau in sorted(by_scheme.items()):
            if not by_tau:
                continue
            taus, errs = zip(*sorted(by_tau.items()))
            ax.loglog(taus, errs, "o-", label=scheme)
        taus = sorted(report.tau_values)
        anchor = max(
            (min(by_tau.values()) for by_tau in by_scheme.values() if by_tau),
            default=1.0,
        )
        slope = [anchor * t / taus[0] for t in taus]
        ax.loglog(taus, slope, "k--", linewidth=0.8, label="slope 1")
        ax.set_xlabel(r"$\tau$")
        ax.set_ylabel("ensemble RMS")
        ax.set_title(title)
        ax.legend(fontsize=8)
        ax.grid(True, which="both", alpha=0.3)
        _save(fig, name)

    _loglog(report.self_rms, "self-convergence at final time", "eoc.png")
    _loglog(report.cross_rms, "difference to implicit reference", "compare.png")

    for scheme, by_tau in sorted(report.energy_series.items()):
        fig = Figure(figsize=(8.0, 3.4))
        ax_energy, ax_track = fig.subplots(1, 2)
        for tau, series in sorted(by_tau.items()):
            ax_energy.plot(series[:, 0], series[:, 1], label=rf"$\tau$={tau:g}")
            if np.any(series[:, 3] > 0):
                ax_track.semilogy(series[:, 0], series[:, 3], label=rf"$\tau$={tau:g}")
        ax_energy.set_xlabel("t")
        ax_energy.set_ylabel("modified energy")
        ax_energy.legend(fontsize=7)
        ax_track.set_xlabel("t")
        ax_track.set_ylabel("|r - sqrt(energy)|")
        fig.suptitle(scheme)
        _save(fig, f"energy_{scheme}.png")

    line_idx, line_x = _line_indices(mesh)
    order = np.argsort(line_x)
    for t in cfg.checkpoint_times:
        fig = Figure(figsize=(5.0, 3.4))
        ax = fig.subplots()
        plotted = False
        for scheme, by_tau in sorted(report.mean_fields.items()):
            for tau, by_time in sorted(by_tau.items()):
                if t in by_time and tau == report.reference_tau:
                    ax.plot(line_x[order], by_time[t][line_idx][order], label=scheme)
                    plotted = True
        if not plotted:
            continue
        ax.set_xlabel("x")
        ax.set_ylabel("mean field on the mid-line")
        ax.set_title(f"t = {t:g}")
        ax.legend(fontsize=8)
        _save(fig, f"lineplot_{t:g}.png")

    for scheme, by_tau in sorted(report.mean_fields.items()):
        by_time = by_tau.get(report.reference_tau, {})
        if not by_time:
            continue
        times = sorted(by_time)
        fig = Figure(figsize=(3.0 * len(times), 2.8))
        axes = fig.subplots(1, len(times), squeeze=False)[0]
        for ax, t in zip(axes, times):
            image = _grid_image(mesh, by_time[t])
            ax.imshow(
                image,
                origin="lower",
                extent=(-cfg.lx / 2, cfg.lx / 2, -cfg.ly / 2, cfg.ly / 2),
                vmin=-1.0,
                vmax=1.0,
                cmap="RdBu_r",
            )
            ax.set_title(f"t = {t:g}", fontsize=9)
        fig.suptitle(f"{scheme}, mean field", fontsize=10)
        _save(fig, f"meanfield_{scheme}.png")
    return written
