"""JSON run configuration: strict parsing, defaults, and provenance digests.

Seeds are mandatory (reproducibility is a product feature, not an option)
and unknown keys are rejected so algorithm-name typos cannot silently fall
back to defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from .errors import ConfigError
from .learners import TOP_LEVEL, AlgorithmId, LearnerConfig
from .pipeline import PipelineConfig
from .util import config_digest

_KNOWN_KEYS = {
    "data",
    "seed",
    "algorithms",
    "replicates",
    "threshold",
    "quantiles",
    "reference",
    "alpha",
    "blacklist",
    "whitelist",
    "roots",
    "leaves",
    "leaf_zero_threshold",
    "out",
    "max_conditioning",
    "tabu_length",
    "max_iterations",
    "restarts",
    "restart_arcs",
}


@dataclass(frozen=True)
class RunConfig:
    """Validated, fully defaulted run configuration."""

    data: Path
    seed: int
    algorithms: tuple[AlgorithmId, ...]
    replicates: int = 500
    threshold: float | str = "auto"
    quantiles: int = 10
    reference: AlgorithmId = AlgorithmId.TABU
    alpha: float = 0.05
    blacklist: tuple = ()
    whitelist: tuple = ()
    roots: tuple = ()
    leaves: tuple = ()  # explicit names; auto detection via auto_leaves
    auto_leaves: bool = False
    leaf_zero_threshold: float = 0.5
    out: Path = Path("out")
    max_conditioning: Optional[int] = None
    tabu_length: int = 10
    max_iterations: int = 200
    restarts: int = 4
    restart_arcs: int = 4

    def learner_config(self) -> LearnerConfig:
        return LearnerConfig(
            alpha=self.alpha,
            max_conditioning=self.max_conditioning,
            tabu_length=self.tabu_length,
            max_iterations=self.max_iterations,
            restarts=self.restarts,
            restart_arcs=self.restart_arcs,
            seed=self.seed,
        )

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(
            algorithms=self.algorithms,
            replicates=self.replicates,
            threshold=self.threshold,
            quantiles=self.quantiles,
            reference=self.reference,
            learner=self.learner_config(),
            blacklist=frozenset(self.blacklist),
            whitelist=frozenset(self.whitelist),
            roots=frozenset(self.roots),
            leaves=frozenset(self.leaves),
            auto_leaves=self.auto_leaves,
            leaf_zero_threshold=self.leaf_zero_threshold,
            seed=self.seed,
        )

    def effective(self) -> dict:
        """The post-default configuration, echoed to output for provenance."""
        return {
            "data": str(self.data),
            "seed": self.seed,
            "algorithms": [a.value for a in self.algorithms],
            "replicates": self.replicates,
            "threshold": self.threshold,
            "quantiles": self.quantiles,
            "reference": self.reference.value,
            "alpha": self.alpha,
            "blacklist": [list(p) for p in self.blacklist],
            "whitelist": [list(p) for p in self.whitelist],
            "roots": list(self.roots),
            "leaves": "auto" if self.auto_leaves else list(self.leaves),
            "leaf_zero_threshold": self.leaf_zero_threshold,
            "max_conditioning": self.max_conditioning,
            "tabu_length": self.tabu_length,
            "max_iterations": self.max_iterations,
            "restarts": self.restarts,
            "restart_arcs": self.restart_arcs,
        }

    def digest(self) -> str:
        # The output directory is provenance-neutral; everything else that
        # can change results feeds the digest.
        return config_digest(self.effective())


def _require(condition: bool, message: str, field_path: str):
    if not condition:
        raise ConfigError(message, field=field_path)


def _parse_pairs(raw: Any, field_path: str) -> tuple:
    _require(isinstance(raw, list), "must be a list of [from, to] pairs", field_path)
    pairs = []
    for i, item in enumerate(raw):
        _require(
            isinstance(item, (list, tuple)) and len(item) == 2,
            "each entry must be a [from, to] pair",
            f"{field_path}[{i}]",
        )
        pairs.append((str(item[0]), str(item[1])))
    return tuple(pairs)


def config_from_dict(raw: dict, base_dir: Path = Path(".")) -> RunConfig:
    unknown = set(raw) - _KNOWN_KEYS
    _require(not unknown, f"unknown keys: {sorted(unknown)}", ",".join(sorted(unknown)))
    _require("data" in raw, "data path is required", "data")
    _require(
        "seed" in raw and isinstance(raw["seed"], int),
        "an integer seed is required (runs must be reproducible)",
        "seed",
    )

    algorithms_raw = raw.get("algorithms", [a.value for a in TOP_LEVEL])
    _require(
        isinstance(algorithms_raw, list) and algorithms_raw,
        "must be a non-empty list",
        "algorithms",
    )
    algorithms = []
    for name in algorithms_raw:
        alg = AlgorithmId.parse(name)
        _require(alg in TOP_LEVEL, f"{alg.value} is restrict-only", "algorithms")
        algorithms.append(alg)
    _require(
        len(set(algorithms)) == len(algorithms), "duplicate algorithms", "algorithms"
    )

    replicates = raw.get("replicates", 500)
    _require(
        isinstance(replicates, int) and replicates >= 1,
        "must be an integer >= 1",
        "replicates",
    )
    quantiles = raw.get("quantiles", 10)
    _require(
        isinstance(quantiles, int) and quantiles >= 2,
        "must be an integer >= 2",
        "quantiles",
    )
    alpha = raw.get("alpha", 0.05)
    _require(
        isinstance(alpha, (int, float)) and 0.0 < alpha < 1.0,
        "must be in (0, 1)",
        "alpha",
    )
    threshold = raw.get("threshold", "auto")
    if threshold != "auto":
        _require(
            isinstance(threshold, (int, float)) and 0.0 <= threshold <= 1.0,
            'must be "auto" or a number in [0, 1]',
            "threshold",
        )
    reference = AlgorithmId.parse(raw.get("reference", "TABU"))
    _require(reference in TOP_LEVEL, "reference must be a top-level id", "reference")

    leaves_raw = raw.get("leaves", [])
    auto_leaves = leaves_raw == "auto"
    leaves = () if auto_leaves else tuple(str(x) for x in leaves_raw)

    blacklist = _parse_pairs(raw.get("blacklist", []), "blacklist")
    whitelist = _parse_pairs(raw.get("whitelist", []), "whitelist")
    clash = set(blacklist) & set(whitelist)
    _require(
        not clash,
        f"pair {sorted(clash)[0] if clash else ''} is both blacklisted and whitelisted",
        "whitelist",
    )

    leaf_zero_threshold = raw.get("leaf_zero_threshold", 0.5)
    _require(
        isinstance(leaf_zero_threshold, (int, float))
        and 0.0 <= leaf_zero_threshold < 1.0,
        "must be in [0, 1)",
        "leaf_zero_threshold",
    )

    max_conditioning = raw.get("max_conditioning")
    if max_conditioning is not None:
        _require(
            isinstance(max_conditioning, int) and max_conditioning >= 0,
            "must be a non-negative integer",
            "max_conditioning",
        )

    def _int_at_least(key, default, minimum):
        value = raw.get(key, default)
        _require(
            isinstance(value, int) and value >= minimum,
            f"must be an integer >= {minimum}",
            key,
        )
        return value

    data_path = Path(raw["data"])
    if not data_path.is_absolute():
        data_path = base_dir / data_path

    return RunConfig(
        data=data_path,
        seed=raw["seed"],
        algorithms=tuple(algorithms),
        replicates=replicates,
        threshold=threshold,
        quantiles=quantiles,
        reference=reference,
        alpha=float(alpha),
        blacklist=blacklist,
        whitelist=whitelist,
        roots=tuple(str(x) for x in raw.get("roots", [])),
        leaves=leaves,
        auto_leaves=auto_leaves,
        leaf_zero_threshold=float(leaf_zero_threshold),
        out=Path(raw.get("out", "out")),
        max_conditioning=max_conditioning,
        tabu_length=_int_at_least("tabu_length", 10, 1),
        max_iterations=_int_at_least("max_iterations", 200, 1),
        restarts=_int_at_least("restarts", 4, 0),
        restart_arcs=_int_at_least("restart_arcs", 4, 0),
    )


def parse_config(path) -> RunConfig:
    """Load and validate a JSON run configuration file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such config file: {path}", field="path")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}", field="path") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object", field="path")
    return config_from_dict(raw, base_dir=path.parent)
