"""Diagnostic and comparison reports plus graph exports.

Report operations emit tidy rows; the CLI layer writes them as CSV and
renders companion figures. Exports are canonical (sorted, stable float
formatting) so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .dataset import Dataset
from .ensemble import ArcPool
from .errors import DataError, GraphError
from .graphs import Arc, ConstraintSpec, Dag
from .learners import AlgorithmId, LearnerConfig
from .pipeline import FittedNetwork, NodeParams, QuantileGrid, sweep_and_select
from .sampling import QueryResult
from .util import canonical_json

logger = logging.getLogger(__name__)


def diagnostic_curve(
    d: Dataset,
    pool: ArcPool,
    constraints: ConstraintSpec,
    grid: QuantileGrid,
    reference: AlgorithmId,
    cfg: LearnerConfig,
) -> tuple[tuple[float, int, int], ...]:
    """(threshold, whitelist_size, connectivity) per swept threshold.

    Connectivity is the arc count of the network learned at that threshold;
    whitelist size counts the qualifying candidate arcs.
    """
    selection = sweep_and_select(d, pool, constraints, grid, reference, cfg)
    return selection.diagnostic


@dataclass(frozen=True)
class ComparisonReport:
    """Arc overlap and strength comparison of one algorithm vs the ensemble."""

    algorithm: AlgorithmId
    common: tuple[tuple[Arc, float, float], ...]  # (arc, single, ensemble)
    unique_single: tuple[Arc, ...]
    unique_ensemble: tuple[Arc, ...]

    @property
    def stronger_in_ensemble(self) -> int:
        return sum(1 for _, s, e in self.common if e < s)

    @property
    def stronger_in_single(self) -> int:
        return sum(1 for _, s, e in self.common if s < e)

    @property
    def equal_strength(self) -> int:
        return sum(1 for _, s, e in self.common if s == e)

    def summary(self) -> dict:
        total = len(self.common)
        def pct(k):
            return round(100.0 * k / total, 1) if total else 0.0
        return {
            "algorithm": self.algorithm.value,
            "common": total,
            "unique_single": len(self.unique_single),
            "unique_ensemble": len(self.unique_ensemble),
            "stronger_in_ensemble": self.stronger_in_ensemble,
            "stronger_in_ensemble_pct": pct(self.stronger_in_ensemble),
            "stronger_in_single": self.stronger_in_single,
            "stronger_in_single_pct": pct(self.stronger_in_single),
            "equal": self.equal_strength,
            "equal_pct": pct(self.equal_strength),
        }


def compare_to_ensemble(
    ensemble_dag: Dag,
    ensemble_strengths: Mapping[Arc, float],
    single_dag: Dag,
    single_strengths: Mapping[Arc, float],
    alg: AlgorithmId,
) -> ComparisonReport:
    """Set algebra on directed arcs plus per-common-arc strength pairs.

    Smaller p-value means stronger; equality means bit-equal p-values.
    """
    if set(ensemble_dag.nodes) != set(single_dag.nodes):
        raise GraphError("node sets differ between ensemble and single network")
    common = sorted(ensemble_dag.arcs & single_dag.arcs)
    return ComparisonReport(
        algorithm=alg,
        common=tuple(
            (arc, float(single_strengths[arc]), float(ensemble_strengths[arc]))
            for arc in common
        ),
        unique_single=tuple(sorted(single_dag.arcs - ensemble_dag.arcs)),
        unique_ensemble=tuple(sorted(ensemble_dag.arcs - single_dag.arcs)),
    )


def _fmt_coef(value: float) -> str:
    return f"{value:.3g}"


def export_dot(
    net: FittedNetwork,
    strengths: Mapping[Arc, float] | None = None,
    digest: str = "",
) -> str:
    """DOT digraph: promoting arcs black, inhibiting red, labels carry the
    linear coefficient; node labels include the sample mean."""
    lines = [f"// config_digest={digest}"] if digest else []
    lines.append("digraph network {")
    for v in sorted(net.dag.nodes):
        p = net.params.get(v)
        label = f"{v}\\nmean={p.mean:.3g}" if p else v
        lines.append(f'  "{v}" [label="{label}"];')
    for u, v in sorted(net.dag.arcs):
        color = {"promote": "black", "inhibit": "red"}.get(
            net.signs.get((u, v), "promote"), "gray"
        )
        attrs = [f'label="{_fmt_coef(net.coefficient(u, v))}"', f"color={color}"]
        if strengths is not None and (u, v) in strengths:
            attrs.append(f'tooltip="p={strengths[(u, v)]:.3g}"')
        lines.append(f'  "{u}" -> "{v}" [{", ".join(attrs)}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_json(
    net: FittedNetwork,
    metadata: Mapping | None = None,
    strengths: Mapping[Arc, float] | None = None,
) -> str:
    """Canonical JSON of the fitted network with run metadata."""
    nodes = []
    for v in sorted(net.dag.nodes):
        p = net.params[v]
        nodes.append(
            {
                "name": v,
                "mean": p.mean,
                "intercept": p.intercept,
                "residual_sd": p.residual_sd,
                "parents": list(p.parents),
                "coefficients": list(p.coefficients),
            }
        )
    arcs = []
    for u, v in sorted(net.dag.arcs):
        arcs.append(
            {
                "from": u,
                "to": v,
                "coefficient": net.coefficient(u, v),
                "sign": net.signs.get((u, v), ""),
                "strength": (
                    strengths.get((u, v)) if strengths is not None else None
                ),
            }
        )
    return canonical_json(
        {"metadata": dict(metadata or {}), "nodes": nodes, "arcs": arcs}
    )


def load_network_json(path) -> tuple[FittedNetwork, dict]:
    """Parse a network export back into a FittedNetwork (round-trips)."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read network file {path}: {exc}") from None
    names = tuple(sorted(node["name"] for node in payload["nodes"]))
    arcs = frozenset((a["from"], a["to"]) for a in payload["arcs"])
    dag = Dag(names, arcs)
    params = {
        node["name"]: NodeParams(
            intercept=float(node["intercept"]),
            parents=tuple(node["parents"]),
            coefficients=tuple(float(c) for c in node["coefficients"]),
            residual_sd=float(node["residual_sd"]),
            mean=float(node["mean"]),
        )
        for node in payload["nodes"]
    }
    signs = {(a["from"], a["to"]): a["sign"] for a in payload["arcs"]}
    return FittedNetwork(dag, params, signs), payload.get("metadata", {})


def export_single_json(
    alg: AlgorithmId,
    net: FittedNetwork,
    strengths: Mapping[Arc, float],
    frequencies: Mapping[Arc, float],
    threshold: float,
    replicate_count: int,
    metadata: Mapping | None = None,
) -> str:
    """Canonical JSON of one bootstrap-averaged algorithm's network."""
    nodes = []
    for v in sorted(net.dag.nodes):
        p = net.params[v]
        nodes.append(
            {
                "name": v,
                "mean": p.mean,
                "intercept": p.intercept,
                "residual_sd": p.residual_sd,
                "parents": list(p.parents),
                "coefficients": list(p.coefficients),
            }
        )
    arcs = []
    for u, v in sorted(net.dag.arcs):
        arcs.append(
            {
                "from": u,
                "to": v,
                "coefficient": net.coefficient(u, v),
                "sign": net.signs.get((u, v), ""),
                "strength": float(strengths[(u, v)]),
                "frequency": float(frequencies.get((u, v), 1.0)),
            }
        )
    return canonical_json(
        {
            "algorithm": alg.value,
            "threshold": threshold,
            "replicate_count": replicate_count,
            "metadata": dict(metadata or {}),
            "nodes": nodes,
            "arcs": arcs,
        }
    )


def load_single_json(path) -> dict:
    """Parse a single-algorithm export; returns algorithm, network, strengths."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read single-network file {path}: {exc}") from None
    names = tuple(sorted(node["name"] for node in payload["nodes"]))
    dag = Dag(names, frozenset((a["from"], a["to"]) for a in payload["arcs"]))
    params = {
        node["name"]: NodeParams(
            intercept=float(node["intercept"]),
            parents=tuple(node["parents"]),
            coefficients=tuple(float(c) for c in node["coefficients"]),
            residual_sd=float(node["residual_sd"]),
            mean=float(node["mean"]),
        )
        for node in payload["nodes"]
    }
    signs = {(a["from"], a["to"]): a["sign"] for a in payload["arcs"]}
    return {
        "algorithm": AlgorithmId.parse(payload["algorithm"]),
        "network": FittedNetwork(dag, params, signs),
        "strengths": {(a["from"], a["to"]): float(a["strength"]) for a in payload["arcs"]},
        "frequencies": {
            (a["from"], a["to"]): float(a["frequency"]) for a in payload["arcs"]
        },
        "threshold": payload["threshold"],
        "replicate_count": payload["replicate_count"],
        "metadata": payload.get("metadata", {}),
    }


def write_diagnostic_rows(rows: Sequence[tuple], path, digest: str = "") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        if digest:
            fh.write(f"# config_digest={digest}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["threshold", "whitelist_size", "connectivity"])
        for q, size, connectivity in rows:
            writer.writerow([repr(float(q)), size, connectivity])


def write_comparison_csv(report: ComparisonReport, path, digest: str = "") -> None:
    """One row per arc in the union, classed by provenance and strength."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        if digest:
            fh.write(f"# config_digest={digest}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["arc", "from", "to", "strength_single", "strength_ensemble", "class"]
        )
        for (u, v), s, e in report.common:
            if e < s:
                cls = "stronger_in_ensemble"
            elif s < e:
                cls = "stronger_in_single"
            else:
                cls = "equal"
            writer.writerow([f"{u}->{v}", u, v, repr(s), repr(e), cls])
        for u, v in report.unique_single:
            writer.writerow([f"{u}->{v}", u, v, "", "", "unique_single"])
        for u, v in report.unique_ensemble:
            writer.writerow([f"{u}->{v}", u, v, "", "", "unique_ensemble"])


def write_query_csv(result: QueryResult, path, digest: str = "") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        if digest:
            fh.write(f"# config_digest={digest}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(result.targets) + ["weight"])
        n = len(result.weights)
        for i in range(n):
            row = [repr(float(result.samples[t][i])) for t in result.targets]
            row.append(repr(float(result.weights[i])))
            writer.writerow(row)
