"""Attack-by-strength robustness grids on synthetic Gaussian tables."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .attacks import ATTACK_KINDS, AttackSpec, apply_attack
from .detect import NullStats, calibrate_null, detect
from .embed import EmbedConfig, embed
from .keying import keyed_prng
from .synth import GaussianSpec, add_label_column, generate, parse_covariance

NO_ATTACK = "none"
LABEL = "label"


@dataclass(frozen=True)
class SweepConfig:
    attacks: tuple[tuple[str, float | None], ...]
    rows: int = 5000
    cols: int = 11
    covariance: str = "identity"
    trials: int = 20
    gamma: float = 0.5
    delta: float = 0.5
    privacy: bool = False
    null: str = "calibrated"
    null_tables: int = 10
    label_weights: tuple[float, ...] = (0.7, 0.3)
    seed: int = 0


@dataclass
class SweepRow:
    attack: str
    strength: float | None
    mean_z: float
    std_z: float
    min_z: float
    n_trials: int
    z_values: list[float] = field(default_factory=list, repr=False)


def parse_attack_list(text: str) -> tuple[tuple[str, float | None], ...]:
    """``"none, row_del:0.1, adv_row_del:0.1|0.2|0.5, shuffle"``."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        kind, _, strengths = item.partition(":")
        kind = kind.strip()
        if kind != NO_ATTACK and kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack {kind!r}")
        if strengths:
            out.extend((kind, float(s)) for s in strengths.split("|"))
        else:
            out.append((kind, None))
    return tuple(out)


def read_sweep_config(path: str | Path, seed: int | None = None) -> SweepConfig:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    kv = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}: expected key = value, got {line!r}")
            kv[key.strip()] = value.strip()
    if "attacks" not in kv:
        raise ValueError(f"{path}: 'attacks' is required")
    casts = {"rows": int, "cols": int, "trials": int, "null_tables": int, "seed": int,
             "gamma": float, "delta": float, "covariance": str, "null": str,
             "privacy": lambda v: v.lower() in ("1", "true", "yes"),
             "label_weights": lambda v: tuple(float(w) for w in v.split("|"))}
    args = {"attacks": parse_attack_list(kv.pop("attacks"))}
    for key, value in kv.items():
        if key not in casts:
            raise ValueError(f"{path}: unknown setting {key!r}")
        args[key] = casts[key](value)
    if seed is not None:
        args["seed"] = seed
    return SweepConfig(**args)


def _trial_seeds(seed: int, trial: int) -> dict[str, int]:
    draws = keyed_prng(seed, f"sweep/{trial}").u64(5)
    return dict(zip(("table", "reference", "key", "attack", "null"), (int(d) for d in draws)))


def _gaussian(config: SweepConfig, n_rows: int, seed: int, label_seed: int):
    cov, rho = parse_covariance(config.covariance)
    t = generate(GaussianSpec(n_rows, config.cols, cov, rho, seed=seed))
    return add_label_column(t, label_seed, config.label_weights, LABEL)


def trial_null(config: SweepConfig, embed_cfg: EmbedConfig, seed: int) -> NullStats | None:
    """Per-key Monte-Carlo null from independent unwatermarked tables."""
    if config.null == "theoretical":
        return None
    if config.null != "calibrated":
        raise ValueError(f"null must be 'theoretical' or 'calibrated', got {config.null!r}")
    stream = keyed_prng(seed, "sweep-null").u64(config.null_tables)
    tables = (_gaussian(config, config.rows, int(s), int(s)) for s in stream)
    return calibrate_null(tables, embed_cfg, n_resamples=1000, min_tables=config.null_tables)


def run_sweep(config: SweepConfig) -> list[SweepRow]:
    zs: dict[tuple[str, float | None], list[float]] = {a: [] for a in config.attacks}
    for trial in range(config.trials):
        s = _trial_seeds(config.seed, trial)
        table = _gaussian(config, config.rows, s["table"], s["table"])
        reference = _gaussian(config, config.rows, s["reference"], s["reference"])
        cfg = EmbedConfig(config.gamma, config.delta, s["key"], privacy=config.privacy)
        null = trial_null(config, cfg, s["null"])
        marked, _ = embed(table, cfg)
        for kind, strength in config.attacks:
            if kind == NO_ATTACK:
                attacked = marked
            else:
                spec = AttackSpec(kind, strength, seed=s["attack"], target=LABEL,
                                  attacker_key=s["attack"] ^ 0x5A5A5A5A,
                                  gamma=config.gamma, delta=config.delta)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    attacked = apply_attack(marked, spec, reference=reference)
            zs[(kind, strength)].append(detect(attacked, cfg, null=null).z)
    rows = []
    for (kind, strength), values in zs.items():
        v = np.asarray(values)
        rows.append(SweepRow(kind, strength, float(v.mean()), float(v.std(ddof=1)) if v.size > 1
                             else 0.0, float(v.min()), int(v.size), [float(x) for x in v]))
    return rows


def write_sweep_csv(rows: list[SweepRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["attack", "strength", "mean_z", "std_z", "min_z", "n_trials"])
        for r in rows:
            w.writerow([r.attack, "" if r.strength is None else r.strength,
                        repr(r.mean_z), repr(r.std_z), repr(r.min_z), r.n_trials])


def sweep_json(rows: list[SweepRow], config: SweepConfig) -> str:
    cfg = asdict(config)
    cfg["attacks"] = [[k, s] for k, s in config.attacks]
    return json.dumps({"config": cfg, "rows": [asdict(r) for r in rows]}, indent=2)
