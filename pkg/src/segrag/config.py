"""Pipeline-wide configuration and the key-value config file loader."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .dedup import DedupConfig
from .graph import GraphConfig
from .retriever import RetrievalConfig

DEFAULT_CANDIDATE_SIZES = (10.0, 20.0, 30.0, 40.0, 50.0, 60.0)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    """Every hyperparameter of the pipeline, flat for easy file override."""

    # segmentation
    segment_size: float = 30.0
    candidate_sizes: tuple[float, ...] = DEFAULT_CANDIDATE_SIZES
    overlap_slack: float = 0.0
    # dedup threshold
    dedup_alpha: float = 0.6
    dedup_beta: float = 0.2
    # context graph
    graph_alpha: float = 0.7
    graph_beta: float = 0.2
    hop_window: int = 5
    cosine_threshold: float = 0.8
    residual_weight: float = 1.0
    gat_layers: int = 2
    # encoder
    token_dim: int = 128
    hidden_dim: int = 64
    theta_q: float = 0.6
    # retrieval
    temperature_rho: float = 0.1
    eta: float = 0.5
    omega: float = 0.8
    mu: float = 0.4
    nu: float = 0.6
    xi: float = 0.3
    top_m: int = 8
    epsilon_kl: float = 1.0
    psd_ridge: float = 1e-10
    # orchestration
    seed: int = 7
    token_budget: int = 4096

    def dedup(self) -> DedupConfig:
        return DedupConfig(alpha=self.dedup_alpha, beta=self.dedup_beta)

    def graph(self) -> GraphConfig:
        return GraphConfig(
            alpha=self.graph_alpha,
            beta=self.graph_beta,
            delta=self.hop_window,
            tau=self.cosine_threshold,
            residual_weight=self.residual_weight,
            num_layers=self.gat_layers,
        )

    def retrieval(self) -> RetrievalConfig:
        return RetrievalConfig(
            temperature_rho=self.temperature_rho,
            eta=self.eta,
            omega=self.omega,
            mu=self.mu,
            nu=self.nu,
            xi=self.xi,
            top_m=self.top_m,
            epsilon_kl=self.epsilon_kl,
            psd_ridge=self.psd_ridge,
        )

    def to_dict(self) -> dict:
        data = asdict(self)
        data["candidate_sizes"] = list(self.candidate_sizes)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        coerced = dict(data)
        if "candidate_sizes" in coerced:
            coerced["candidate_sizes"] = tuple(float(v) for v in coerced["candidate_sizes"])
        return cls(**coerced)

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        """Parse a ``key = value`` file; values are JSON literals.

        Blank lines and ``#`` comment lines are skipped; strings may be
        left unquoted.
        """
        data = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
                key, _, value = line.partition("=")
                key = key.strip()
                value = value.strip()
                try:
                    data[key] = json.loads(value)
                except json.JSONDecodeError:
                    data[key] = value
        return cls.from_dict(data)

    def override(self, **kwargs) -> "PipelineConfig":
        """Replace fields, ignoring None values (CLI flag plumbing)."""
        updates = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **updates) if updates else self
