"""Figure and table generators for curlflow run artifacts.

All operations are read-only re-reporting: every number they print or
annotate is computed from the CSV files alone, so re-running is
idempotent and the values match the solver's own logs exactly.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy.special import erf  # noqa: E402

from .runio import Run, load_run, read_snapshot  # noqa: E402


def fit_growth_slope(t, norm) -> float:
    """Log-log slope of a norm series; zero-valued samples are skipped,
    and an all-flat or empty series reports slope 0."""
    t = np.asarray(t, dtype=float)
    norm = np.asarray(norm, dtype=float)
    keep = (t > 0) & (norm > 0)
    if np.count_nonzero(keep) < 2 or np.ptp(norm[keep]) == 0.0:
        return 0.0
    return float(np.polyfit(np.log(t[keep]), np.log(norm[keep]), 1)[0])


def plot_curl_growth(runs, out_dir, column="curl_b_L1") -> dict:
    """Log-log curl norm vs time for each run, fitted slope annotated.

    ``runs`` are run directories or loaded Run objects.  Returns
    {run name: fitted slope}; writes one figure per run into out_dir.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    slopes = {}
    for item in runs:
        run = item if isinstance(item, Run) else load_run(item)
        t = run.diagnostics["t"]
        norm = run.diagnostics[column]
        slope = fit_growth_slope(t, norm)
        name = run.path.name
        slopes[name] = slope

        fig, ax = plt.subplots(figsize=(5, 4))
        keep = (t > 0) & (norm > 0)
        if np.any(keep):
            ax.loglog(t[keep], norm[keep], "-", lw=1)
        ax.set_xlabel("t")
        ax.set_ylabel(column)
        ax.set_title(f"{name}: fitted slope {slope:.3f}")
        fig.tight_layout()
        fig.savefig(out_dir / f"curl_growth_{name}.png", dpi=150)
        plt.close(fig)
    return slopes


def stokes_profile(x, t, nu, u0=0.1, x0=0.5):
    """Analytic shear-layer profile u2(x, t) = u0 erf((x-x0)/(2 sqrt(nu t)))."""
    return u0 * erf((np.asarray(x, dtype=float) - x0)
                    / (2.0 * np.sqrt(nu * t)))


def stokes_report(snapshot, nu, t=None, out_path=None, u0=0.1, x0=0.5):
    """Overlay the mid-row u2 profile against the analytic erf solution.

    Returns the L-infinity error; writes the overlay figure if out_path
    is given.  ``t`` defaults to the snapshot's own time stamp.
    """
    meta, fields = read_snapshot(snapshot)
    if t is None:
        t = meta["t"]
    x = fields["x"][:, 0]
    u2 = fields["u2"][:, int(meta["ny"]) // 2]
    ref = stokes_profile(x, t, nu, u0=u0, x0=x0)
    err = float(np.max(np.abs(u2 - ref)))

    if out_path is not None:
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.plot(x, ref, "k-", lw=1, label="analytic")
        ax.plot(x, u2, "C0.", ms=2, label="computed")
        ax.set_xlabel("x")
        ax.set_ylabel("u2")
        ax.set_title(f"nu={nu:g}, t={t:g}: Linf error {err:.3e}")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out_path, dpi=150)
        plt.close(fig)
    print(f"stokes_report: nu={nu:g} t={t:g} Linf={err!r}")
    return err


def convergence_table(rows, out_path=None):
    """Error table with observed orders between successive meshes.

    ``rows`` is a sequence of (h, L1, L2, Linf) tuples sorted from the
    coarsest mesh; the observed order between rows k-1 and k is
    log(e_{k-1}/e_k) / log(h_{k-1}/h_k).  With a single row no order
    columns are emitted.  Returns the table as a list of dicts and
    optionally writes it as CSV.
    """
    rows = [tuple(float(v) for v in row) for row in rows]
    table = []
    for k, (h, l1, l2, linf) in enumerate(rows):
        entry = {"h": h, "L1": l1, "L2": l2, "Linf": linf}
        if k > 0 and len(rows) > 1:
            hp, p1, p2, pinf = rows[k - 1]
            ratio = np.log(hp / h)
            entry["order_L1"] = float(np.log(p1 / l1) / ratio)
            entry["order_L2"] = float(np.log(p2 / l2) / ratio)
            entry["order_Linf"] = float(np.log(pinf / linf) / ratio)
        table.append(entry)

    if out_path is not None:
        has_orders = len(rows) > 1
        cols = ["h", "L1", "L2", "Linf"]
        if has_orders:
            cols = ["h", "L1", "order_L1", "L2", "order_L2",
                    "Linf", "order_Linf"]
        lines = [",".join(cols)]
        for entry in table:
            lines.append(",".join(repr(entry[c]) if c in entry else ""
                                  for c in cols))
        Path(out_path).write_text("\n".join(lines) + "\n")
    return table
