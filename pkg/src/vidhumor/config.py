"""Run configuration: YAML file with environment-variable overrides.

Every pipeline stage reads the same config. Backend endpoints can be set
per kind or inherited from a shared default; VIDHUMOR_BACKEND_<KIND>_URL
overrides the base URL of a single kind, VIDHUMOR_BACKEND_URL overrides
all of them.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

from .backends import (
    KINDS,
    BackendClient,
    BackendEndpoint,
    HttpTransport,
    RetryPolicy,
    ScriptedTransport,
    load_fixture,
)
from .filtering import FilterConfig, FilterTemplates, load_templates
from .prompting import PromptConfig
from .metrics import DEFAULT_TAUS, DEFAULT_THRESHOLDS


@dataclass(frozen=True)
class RunConfig:
    endpoints: dict = field(default_factory=dict)  # kind -> BackendEndpoint
    fixture_path: Optional[str] = None  # scripted transport instead of HTTP
    divergence_threshold: float = 0.6
    templates_dir: Optional[str] = None
    k: int = 20
    fps: float = 5.0
    ablate: frozenset = frozenset()
    taus: tuple = DEFAULT_TAUS
    sentbert_thresholds: tuple = DEFAULT_THRESHOLDS["sentbert"]
    roscoe_thresholds: tuple = DEFAULT_THRESHOLDS["roscoe_ra"]
    taxonomy_path: Optional[str] = None
    reports_dir: str = "reports"
    media_root: Optional[str] = None
    jobs: int = os.cpu_count() or 1

    def filter_config(self) -> FilterConfig:
        templates = (load_templates(self.templates_dir)
                     if self.templates_dir else FilterTemplates())
        return FilterConfig(
            divergence_threshold=self.divergence_threshold,
            templates=templates,
        )

    def prompt_config(self) -> PromptConfig:
        return PromptConfig(k=self.k, fps=self.fps, ablate=self.ablate)

    def client(self) -> BackendClient:
        if self.fixture_path:
            transport = ScriptedTransport(load_fixture(self.fixture_path))
            return BackendClient(transport)
        if not self.endpoints:
            raise ValueError(
                "no backend endpoints configured (set backends.base_url or "
                "a fixture)"
            )
        return BackendClient(HttpTransport(self.endpoints))

    def taxonomy(self) -> list[dict]:
        if self.taxonomy_path:
            with open(self.taxonomy_path, encoding="utf-8") as fh:
                return json.load(fh)
        return default_taxonomy()


def default_taxonomy() -> list[dict]:
    ref = resources.files("vidhumor") / "configs" / "taxonomy.json"
    return json.loads(ref.read_text(encoding="utf-8"))


def _endpoint_from(kind: str, section: dict,
                   shared: dict) -> Optional[BackendEndpoint]:
    merged = {**shared, **section}
    base_url = os.environ.get(
        f"VIDHUMOR_BACKEND_{kind.upper()}_URL",
        os.environ.get("VIDHUMOR_BACKEND_URL", merged.get("base_url")),
    )
    if not base_url:
        return None
    return BackendEndpoint(
        kind=kind,
        base_url=base_url,
        timeout_s=float(merged.get("timeout_s", 30.0)),
        retry=RetryPolicy(
            max_attempts=int(merged.get("max_attempts", 3)),
            backoff_s=float(merged.get("backoff_s", 0.5)),
        ),
    )


def load_config(path: Optional[str | Path] = None) -> RunConfig:
    """Read a YAML config file; a missing path yields pure defaults plus
    env-var endpoint overrides."""
    data: dict = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}

    backends_cfg = dict(data.get("backends", {}))
    shared = {
        k: backends_cfg.pop(k)
        for k in ("base_url", "timeout_s", "max_attempts", "backoff_s")
        if k in backends_cfg
    }
    endpoints = {}
    for kind in KINDS:
        ep = _endpoint_from(kind, backends_cfg.get(kind, {}), shared)
        if ep is not None:
            endpoints[kind] = ep

    filter_cfg = data.get("filter", {})
    prompt_cfg = data.get("prompt", {})
    eval_cfg = data.get("eval", {})
    paths = data.get("paths", {})

    return RunConfig(
        endpoints=endpoints,
        fixture_path=data.get("fixture"),
        divergence_threshold=float(
            filter_cfg.get("divergence_threshold", 0.6)
        ),
        templates_dir=filter_cfg.get("templates_dir"),
        k=int(prompt_cfg.get("k", 20)),
        fps=float(prompt_cfg.get("fps", 5.0)),
        ablate=frozenset(prompt_cfg.get("ablate", [])),
        taus=tuple(eval_cfg.get("taus", DEFAULT_TAUS)),
        sentbert_thresholds=tuple(
            eval_cfg.get("sentbert_thresholds",
                         DEFAULT_THRESHOLDS["sentbert"])
        ),
        roscoe_thresholds=tuple(
            eval_cfg.get("roscoe_thresholds",
                         DEFAULT_THRESHOLDS["roscoe_ra"])
        ),
        taxonomy_path=eval_cfg.get("taxonomy_path"),
        reports_dir=paths.get("reports_dir", "reports"),
        media_root=paths.get("media_root"),
        jobs=int(data.get("jobs", os.cpu_count() or 1)),
    )
