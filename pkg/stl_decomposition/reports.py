"""
Result directory emission: JSON records, CSV tables and static plots.

    decomposition.json   rewritten tasks, per-task accuracy, status, settings
    structure.csv        per computing edge: sum of scales, |Pi|, chi dimension, shared rows, |Q|
    trace.csv            iteration,edge,rho,sum_alpha,max_shared_residual
    graphs.json          communication, task and edge-computing graphs
    verification.json    soundness oracle results
    truth_sets.png       each decomposed truth set with its parts
    graphs.png           communication tree with old and new task edges
    convergence.png      penalties and objective per round (decentralized runs)
"""

import csv
import json
import logging
from pathlib import Path
from typing import Dict, List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import networkx as nx  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Polygon as PolygonPatch  # noqa: E402
from scipy.spatial import ConvexHull, QhullError  # noqa: E402

from .assembly import DecompositionProblem  # noqa: E402
from .geometry import Polytope  # noqa: E402
from .graphs import canonical  # noqa: E402

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["iteration", "edge", "rho", "sum_alpha", "max_shared_residual"]
STRUCTURE_COLUMNS = ["edge", "sum_alpha", "pi", "chi_dim", "shared_rows", "xi_count"]


def structure_table(problem: DecompositionProblem, decomposed=()) -> List[Dict]:
    """One row per computing edge: summed scales of its parts and the bookkeeping of its local problem."""
    if problem is None:
        return []
    sum_alpha: Dict = {}
    for d in decomposed:
        for part in d.parts:
            e = canonical(part.edge)
            sum_alpha[e] = sum_alpha.get(e, 0.0) + part.param.scale
    return [{
        "edge": f"{rs[0]}-{rs[1]}",
        "sum_alpha": sum_alpha.get(rs, 0.0),
        "pi": prob.num_params,
        "chi_dim": prob.chi_dim,
        "shared_rows": prob.shared_rows(),
        "xi_count": prob.xi_count,
    } for rs, prob in problem.edge_problems.items()]


def _write_csv(path: Path, columns: List[str], rows: List[Dict]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)


def _ordered_vertices(P: Polytope) -> np.ndarray:
    V = P.vertices
    if len(V) < 3:
        return V
    try:
        return V[ConvexHull(V).vertices]
    except QhullError:
        return V


def plot_truth_sets(result, path: Path) -> None:
    decomposed = result.extraction.decomposed
    cols = min(4, len(decomposed))
    rows = int(np.ceil(len(decomposed) / cols))
    fig, axes = plt.subplots(rows, cols, figsize=(4 * cols, 4 * rows), squeeze=False)
    cmap = plt.get_cmap("tab10")
    for ax, d in zip(axes.flat, decomposed):
        V = _ordered_vertices(d.task.truth_set)
        ax.add_patch(PolygonPatch(V, closed=True, fill=False, edgecolor="black", linewidth=2,
                                  label=d.task.label))
        for k, part in enumerate(d.parts):
            P = part.truth_set_now()
            W = _ordered_vertices(P)
            if len(W) >= 3:
                ax.add_patch(PolygonPatch(W, closed=True, alpha=0.35, color=cmap(k % 10),
                                          label=f"{part.edge[0]}->{part.edge[1]}"))
            else:
                ax.plot(W[:, 0], W[:, 1], "o", color=cmap(k % 10))
        ax.plot(*np.array([0.0, 0.0]), "k+")
        ax.set_title(f"{d.task.label}  accuracy {d.accuracy:.3f}", fontsize=9)
        ax.set_aspect("equal")
        ax.autoscale_view()
        ax.legend(fontsize=6, loc="best")
    for ax in list(axes.flat)[len(decomposed):]:
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_graphs(result, path: Path) -> None:
    graphs = result.graphs
    layout = nx.spring_layout(graphs.comm, seed=result.scenario.seed)
    fig, ax = plt.subplots(figsize=(7, 6))
    nx.draw_networkx_nodes(graphs.comm, layout, ax=ax, node_color="#dddddd")
    nx.draw_networkx_labels(graphs.comm, layout, ax=ax, font_size=8)
    nx.draw_networkx_edges(graphs.comm, layout, ax=ax, edge_color="#999999", width=4)
    new_edges = {canonical(t.edge) for t in result.psi_bar if not t.is_independent}
    old = [item.task.edge for item in result.index.items if not graphs.has_comm_edge(*item.task.edge)]
    nx.draw_networkx_edges(nx.Graph(list(new_edges)), layout, ax=ax, edge_color="tab:blue", width=1.5)
    if old:
        nx.draw_networkx_edges(nx.Graph(old), layout, ax=ax, edge_color="tab:red", style="dashed")
    ax.set_title("communication tree (grey), rewritten tasks (blue), decomposed tasks (red)", fontsize=9)
    ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_convergence(solution, path: Path) -> None:
    rounds = solution.rounds
    it = [r.iteration for r in rounds]
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    top.semilogy(it, [max(r.max_rho, 1e-16) for r in rounds])
    top.set_ylabel("max rho")
    bottom.plot(it, [-r.objective for r in rounds])
    bottom.set_ylabel("sum of scales")
    bottom.set_xlabel("round")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def decomposition_record(result) -> Dict:
    solution = result.solution
    return {
        "scenario": str(Path(result.scenario.source).resolve()) if result.scenario.source else None,
        "name": result.scenario.name,
        "status": solution.status if solution else "Identity",
        "summary": solution.summary() if solution else None,
        "solver": result.config.to_dict(),
        "accuracy": {d.task.label: d.accuracy for d in result.extraction.decomposed},
        "psi_bar": [t.to_dict() for t in result.psi_bar],
        "decomposed": [d.to_dict() for d in result.extraction.decomposed],
    }


def graphs_record(result) -> Dict:
    graphs = result.graphs
    record = {
        "radius": graphs.radius,
        "reconstructed": result.scenario.reconstructed,
        "comm_edges": [list(e) for e in graphs.comm_edges],
        "task_edges": [list(e) for e in sorted(graphs.task_edges) if e[0] != e[1]],
        "rewritten_task_edges": sorted({canonical(t.edge) for t in result.psi_bar if not t.is_independent}),
        "theta_nodes": [],
        "theta_edges": [],
    }
    if result.problem is not None:
        record["theta_nodes"] = [list(e) for e in result.problem.theta.nodes]
        record["theta_edges"] = [[list(a), list(b)] for a, b in result.problem.theta.edges]
    record["rewritten_task_edges"] = [list(e) for e in record["rewritten_task_edges"]]
    return record


def emit_reports(result, out_dir) -> List[Path]:
    """Write the result directory; returns the files written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def dump(name: str, data) -> None:
        path = out / name
        path.write_text(json.dumps(data, indent=2))
        written.append(path)

    dump("decomposition.json", decomposition_record(result))
    dump("graphs.json", graphs_record(result))
    dump("verification.json", result.verification.to_dict())

    path = out / "structure.csv"
    _write_csv(path, STRUCTURE_COLUMNS, structure_table(result.problem, result.extraction.decomposed))
    written.append(path)

    path = out / "trace.csv"
    traces = result.solution.traces if result.solution else []
    _write_csv(path, TRACE_COLUMNS, [{
        "iteration": r.iteration, "edge": f"{r.edge[0]}-{r.edge[1]}", "rho": r.rho,
        "sum_alpha": r.sum_alpha, "max_shared_residual": r.max_shared_residual,
    } for r in traces])
    written.append(path)

    if result.extraction.decomposed:
        plot_truth_sets(result, out / "truth_sets.png")
        plot_graphs(result, out / "graphs.png")
        written += [out / "truth_sets.png", out / "graphs.png"]
        if result.solution is not None and result.solution.rounds:
            plot_convergence(result.solution, out / "convergence.png")
            written.append(out / "convergence.png")
    logger.info("wrote %d files to %s", len(written), out)
    return written
