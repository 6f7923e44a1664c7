import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict

from config.settings import (
    DEFAULT_GRAPH_SETTINGS,
    DEFAULT_MODEL_SETTINGS,
    DEFAULT_NOTEARS_SETTINGS,
    DEFAULT_SEEDS,
    DEFAULT_SPECTRAL_SETTINGS,
    DEFAULT_SWEEP_SETTINGS,
    DEFAULT_SYNTHETIC_SETTINGS,
    DEFAULT_TRAINING_SETTINGS,
    OUTPUT_ROOT_ENV,
)
from modules.model.training import TrainingConfig
from utils.helpers import sha256_bytes

logger = logging.getLogger(__name__)

# Every accepted section.key with its default; the default fixes the value type
CONFIG_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "run": {
        "name": "run",
        "output_dir": "",
        "seeds": list(DEFAULT_SEEDS),
        "max_workers": DEFAULT_SWEEP_SETTINGS["MAX_WORKERS"],
    },
    "data": {
        "path": "",
        "target": "",
        "task": "regression",
        "kinds": [],
        "split_seed": 1,
        "synthetic_d": DEFAULT_SYNTHETIC_SETTINGS["D"],
        "synthetic_k": DEFAULT_SYNTHETIC_SETTINGS["K"],
        "synthetic_n": DEFAULT_SYNTHETIC_SETTINGS["N"],
    },
    "graph": {
        "method": DEFAULT_GRAPH_SETTINGS["METHOD"],
        "path": "",
        "directed": DEFAULT_GRAPH_SETTINGS["DIRECTED_IMPORT"],
        "lambda1": DEFAULT_NOTEARS_SETTINGS["LAMBDA1"],
        "lambda_search": False,
        "w_threshold": DEFAULT_NOTEARS_SETTINGS["W_THRESHOLD"],
    },
    "spectral": {
        "laplacian": DEFAULT_SPECTRAL_SETTINGS["LAPLACIAN"],
        "k": DEFAULT_SPECTRAL_SETTINGS["K"],
    },
    "pe": {
        "mode": DEFAULT_MODEL_SETTINGS["PE_MODE"],
        "alpha": DEFAULT_SPECTRAL_SETTINGS["ALPHA"],
        "alpha_grid": [],
    },
    "model": {
        "total_token_dim": DEFAULT_MODEL_SETTINGS["TOTAL_TOKEN_DIM"],
        "n_layers": DEFAULT_MODEL_SETTINGS["N_LAYERS"],
        "n_heads": DEFAULT_MODEL_SETTINGS["N_HEADS"],
        "attention_dropout": DEFAULT_MODEL_SETTINGS["ATTENTION_DROPOUT"],
        "ffn_dropout": DEFAULT_MODEL_SETTINGS["FFN_DROPOUT"],
        "residual_dropout": DEFAULT_MODEL_SETTINGS["RESIDUAL_DROPOUT"],
    },
    "training": {
        "learning_rate": DEFAULT_TRAINING_SETTINGS["LEARNING_RATE"],
        "weight_decay": DEFAULT_TRAINING_SETTINGS["WEIGHT_DECAY"],
        "batch_size": DEFAULT_TRAINING_SETTINGS["BATCH_SIZE"],
        "max_epochs": DEFAULT_TRAINING_SETTINGS["MAX_EPOCHS"],
        "patience": DEFAULT_TRAINING_SETTINGS["PATIENCE"],
        "min_epochs": DEFAULT_TRAINING_SETTINGS["MIN_EPOCHS"],
    },
}


def _parse_scalar(text):
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_value(text, default):
    """Parse a config value into the type of its default"""
    text = text.strip()
    if isinstance(default, list):
        return [_parse_scalar(item.strip()) for item in text.split(",") if item.strip()]
    if isinstance(default, bool):
        if text.lower() not in ("true", "false"):
            raise ValueError(f"expected true or false, got '{text}'")
        return text.lower() == "true"
    try:
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ValueError(f"expected a {type(default).__name__}, got '{text}'") from None
    return _parse_scalar(text) if text else ""


def _render(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(_render(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class RunConfig:
    """Resolved run configuration: every section.key with a value"""

    values: Dict[str, Dict[str, Any]] = field(default_factory=lambda: {s: dict(v) for s, v in CONFIG_DEFAULTS.items()})
    source: str = ""

    def get(self, section, key):
        return self.values[section][key]

    def set(self, section, key, value):
        if section not in CONFIG_DEFAULTS:
            raise ValueError(f"Unknown config section '{section}'")
        if key not in CONFIG_DEFAULTS[section]:
            raise ValueError(f"Unknown config key '{section}.{key}'")
        self.values[section][key] = value

    def canonical(self):
        """Sorted key = value rendering used for hashing"""
        lines = []
        for section in sorted(self.values):
            for key in sorted(self.values[section]):
                lines.append(f"{section}.{key} = {_render(self.values[section][key])}")
        return "\n".join(lines) + "\n"

    def config_hash(self):
        return sha256_bytes(self.canonical().encode("utf-8"))

    @property
    def seeds(self):
        return [int(s) for s in self.values["run"]["seeds"]]

    @property
    def kinds(self):
        """Column kinds from 'col:kind' entries"""
        kinds = {}
        for entry in self.values["data"]["kinds"]:
            column, _, kind = str(entry).partition(":")
            kinds[column.strip()] = kind.strip()
        return kinds

    def training_config(self):
        section = self.values["training"]
        return TrainingConfig(
            learning_rate=section["learning_rate"],
            weight_decay=section["weight_decay"],
            batch_size=section["batch_size"],
            max_epochs=section["max_epochs"],
            patience=section["patience"],
            min_epochs=section["min_epochs"],
        )

    def model_overrides(self):
        """ModelSpec keyword arguments from the model section"""
        return dict(self.values["model"])

    def output_root(self):
        root = self.values["run"]["output_dir"] or os.environ.get(OUTPUT_ROOT_ENV) or "runs"
        return Path(root)

    def run_dir(self):
        return self.output_root() / f"{self.values['run']['name']}-{self.config_hash()[:12]}"

    def validate(self):
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        data_path = self.values["data"]["path"]
        if data_path and not Path(data_path).exists():
            raise ValueError(f"Data file not found: {data_path}")
        if data_path and not self.values["data"]["target"]:
            raise ValueError("data.target is required with data.path")
        graph = self.values["graph"]
        if graph["method"] == "imported":
            if not graph["path"] or not Path(graph["path"]).exists():
                raise ValueError(f"Graph file not found: {graph['path']}")
        if self.values["pe"]["mode"] not in ("none", "fixed", "random", "learnable"):
            raise ValueError(f"Unknown PE mode '{self.values['pe']['mode']}'")
        if self.values["data"]["task"] not in ("regression", "classification"):
            raise ValueError(f"Unknown task '{self.values['data']['task']}'")
        return self


def parse_config(text, source=""):
    """
    Parse flat 'section.key = value' text on top of the defaults.

    Blank lines and lines starting with # are ignored.

    Returns:
        RunConfig: Resolved configuration
    """
    config = RunConfig(source=source)
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"Line {number}: expected 'section.key = value'")
        name, value = (part.strip() for part in line.split("=", 1))
        section, dot, key = name.partition(".")
        if not dot:
            raise ValueError(f"Line {number}: key '{name}' has no section prefix")
        if section not in CONFIG_DEFAULTS:
            raise ValueError(f"Line {number}: unknown section '{section}'")
        if key not in CONFIG_DEFAULTS[section]:
            raise ValueError(f"Line {number}: unknown key '{name}'")
        config.set(section, key, parse_value(value, CONFIG_DEFAULTS[section][key]))
    return config


def load_config(path):
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), source=str(path))
