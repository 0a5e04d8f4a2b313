"""Campaign configuration.

One YAML file drives every subcommand. Environment variables override
secrets only (the provider API key env name); command-line flags
override file values. Every output directory receives a frozen JSON
copy of the effective configuration so results stay auditable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path

import yaml

from .context import DEFAULT_BUDGETS, HEURISTICS
from .errors import ConfigError
from .loop import DEFAULT_SENTINEL, GuardConfig
from .provider import HttpProvider, PricingTable, ScriptedProvider


@dataclass
class ProviderSettings:
    """How to reach the model: scripted replay or a live endpoint."""

    mode: str = "scripted"            # scripted | http
    model: str = "scripted-model"
    endpoint: str = ""
    api_key_env: str = "MODEL_API_KEY"
    scripts_dir: Path | None = None   # scripted: one reply file per (bug, config)
    pricing: dict = field(default_factory=lambda: {
        "scripted-model": {"input_per_million": "0.28",
                           "output_per_million": "0.42"},
    })

    def pricing_table(self) -> PricingTable:
        return PricingTable.from_dict(self.pricing)


@dataclass
class CampaignConfig:
    manifest: Path
    out_dir: Path
    configs: tuple[str, ...] = HEURISTICS
    guards: GuardConfig = field(default_factory=GuardConfig)
    provider: ProviderSettings = field(default_factory=ProviderSettings)
    adapter: str = "local-python"
    backend: str = "local"
    workers: int = 1
    template_dir: Path | None = None
    budgets: dict = field(default_factory=lambda: dict(DEFAULT_BUDGETS))
    language: str = "c_family"
    sentinel: str = DEFAULT_SENTINEL

    def __post_init__(self):
        if not self.configs:
            raise ConfigError("at least one heuristic config must be selected")
        unknown = [c for c in self.configs if c not in HEURISTICS]
        if unknown:
            raise ConfigError(f"unknown heuristic configs: {unknown}")
        if self.workers < 1:
            raise ConfigError("worker count must be >= 1")

    def to_json(self) -> dict:
        return {
            "manifest": str(self.manifest),
            "out_dir": str(self.out_dir),
            "configs": list(self.configs),
            "guards": {
                "max_steps": self.guards.max_steps,
                "max_cost": str(self.guards.max_cost),
                "max_wall_time": self.guards.max_wall_time,
                "per_command_timeout": self.guards.per_command_timeout,
            },
            "provider": {
                "mode": self.provider.mode,
                "model": self.provider.model,
                "endpoint": self.provider.endpoint,
                "api_key_env": self.provider.api_key_env,
                "scripts_dir": (str(self.provider.scripts_dir)
                                if self.provider.scripts_dir else None),
                "pricing": self.provider.pricing,
            },
            "adapter": self.adapter,
            "backend": self.backend,
            "workers": self.workers,
            "template_dir": str(self.template_dir) if self.template_dir else None,
            "budgets": self.budgets,
            "language": self.language,
            "sentinel": self.sentinel,
        }

    def freeze_into(self, out_dir: Path) -> Path:
        out_dir.mkdir(parents=True, exist_ok=True)
        frozen = out_dir / "effective_config.json"
        frozen.write_text(json.dumps(self.to_json(), indent=2) + "\n")
        return frozen


def load_campaign(path: Path | str, overrides: dict | None = None) -> CampaignConfig:
    """Load a campaign YAML, applying flag overrides on top."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})

    base = path.parent

    def respath(value, default=None):
        if value is None:
            return default
        p = Path(value)
        return p if p.is_absolute() else (base / p).resolve()

    try:
        guards_raw = raw.get("guards", {})
        guards = GuardConfig(
            max_steps=int(guards_raw.get("max_steps", 50)),
            max_cost=Decimal(str(guards_raw.get("max_cost", "1.00"))),
            max_wall_time=float(guards_raw.get("max_wall_time", 3600.0)),
            per_command_timeout=float(guards_raw.get("per_command_timeout", 300.0)),
        )
        provider_raw = raw.get("provider", {})
        provider = ProviderSettings(
            mode=provider_raw.get("mode", "scripted"),
            model=provider_raw.get("model", "scripted-model"),
            endpoint=provider_raw.get("endpoint", ""),
            api_key_env=provider_raw.get("api_key_env", "MODEL_API_KEY"),
            scripts_dir=respath(provider_raw.get("scripts_dir")),
        )
        if "pricing" in provider_raw:
            provider.pricing = provider_raw["pricing"]
        budgets = dict(DEFAULT_BUDGETS)
        budgets.update({k: int(v) for k, v in raw.get("budgets", {}).items()})
        return CampaignConfig(
            manifest=respath(raw.get("manifest")),
            out_dir=respath(raw.get("out_dir"), base / "out"),
            configs=tuple(raw.get("configs", list(HEURISTICS))),
            guards=guards,
            provider=provider,
            adapter=raw.get("adapter", "local-python"),
            backend=raw.get("backend", "local"),
            workers=int(raw.get("workers", 1)),
            template_dir=respath(raw.get("template_dir")),
            budgets=budgets,
            language=raw.get("language", "c_family"),
            sentinel=raw.get("sentinel", DEFAULT_SENTINEL),
        )
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid campaign config {path}: {exc}") from exc


def make_provider(settings: ProviderSettings, bug_id: str, config: str):
    """Build the provider instance one (bug, config) job will query."""
    if settings.mode == "scripted":
        if settings.scripts_dir is None:
            raise ConfigError("scripted provider needs scripts_dir")
        script = Path(settings.scripts_dir) / f"{bug_id}__{config}.jsonl"
        if not script.exists():
            raise ConfigError(f"no scripted replies at {script}")
        return ScriptedProvider.from_file(script)
    if settings.mode == "http":
        import os
        if not os.environ.get(settings.api_key_env):
            raise ConfigError(
                f"live provider configured but {settings.api_key_env} is unset"
            )
        if not settings.endpoint:
            raise ConfigError("live provider needs an endpoint")
        return HttpProvider(
            endpoint=settings.endpoint,
            model=settings.model,
            api_key_env=settings.api_key_env,
        )
    raise ConfigError(f"unknown provider mode {settings.mode!r}")
