"""Run configuration: dataclass defaults, TOML loading and canonical hashing.

Full-scale defaults follow the published training recipe (batch 64 as 16x4,
Adam at 3.5e-4 with weight decay 5e-4, pretrain decay x0.1 at epochs 40 and
70, teacher momentum 0.999, two parts, reduction ratio 4, loss weights
1 / 0.5 / 0.5). ``TrainConfig.desk()`` shrinks every schedule to something a
CPU finishes in minutes; the shipped ``desk.toml`` mirrors it.
"""

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import tomli

from .clustering import ClusterConfig
from .data import SamplerConfig
from .errors import ConfigError
from .losses import LossWeights
from .models import EncoderConfig

ABLATIONS = ("full", "no-fm", "baseline")
DTYPES = ("float32", "float64")


@dataclass(frozen=True)
class TrainConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    pretrain_epochs: int = 80
    pretrain_iterations: int = 0  # 0 derives ceil(num_samples / batch_size)
    pretrain_lr: float = 3.5e-4
    lr_decay_epochs: tuple[int, ...] = (40, 70)
    lr_decay_factor: float = 0.1
    finetune_epochs: int = 80
    finetune_iterations: int = 400
    finetune_lr: float = 3.5e-4
    weight_decay: float = 5e-4
    ema_momentum: float = 0.999
    num_parts: int = 2
    reduction_ratio: int = 4
    ablation: str = "full"
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if self.pretrain_epochs < 0 or self.finetune_epochs < 0:
            raise ConfigError("epoch counts must be non-negative")
        if min(self.pretrain_lr, self.finetune_lr, self.lr_decay_factor) <= 0:
            raise ConfigError("learning rates and decay factor must be positive")
        if self.weight_decay < 0:
            raise ConfigError("weight decay must be non-negative")
        if not 0.0 <= self.ema_momentum < 1.0:
            raise ConfigError("ema momentum must be in [0, 1)")
        if self.ablation not in ABLATIONS:
            raise ConfigError(f"ablation must be one of {ABLATIONS}")
        if self.dtype not in DTYPES:
            raise ConfigError(f"dtype must be one of {DTYPES}")
        if self.num_parts < 1:
            raise ConfigError("num_parts must be >= 1")
        if self.encoder.map_height % self.num_parts:
            raise ConfigError(
                f"feature map height {self.encoder.map_height} not divisible "
                f"by {self.num_parts} parts"
            )
        if self.encoder.channels % self.reduction_ratio:
            raise ConfigError("reduction ratio must divide the channel count")

    @classmethod
    def desk(cls, seed: int = 0, **overrides) -> "TrainConfig":
        """CPU-sized configuration used by the synthetic experiments."""
        defaults = dict(
            sampler=SamplerConfig(identities_per_batch=8, images_per_identity=4),
            cluster=ClusterConfig(num_clusters=32, restarts=3, seed=seed),
            pretrain_epochs=15,
            finetune_epochs=8,
            finetune_iterations=50,
            seed=seed,
        )
        defaults.update(overrides)
        return cls(**defaults)

    def to_mapping(self) -> dict:
        """Nested plain-dict form, matching the TOML section layout."""
        return {
            "run": {
                "seed": self.seed,
                "dtype": self.dtype,
                "weight_decay": self.weight_decay,
            },
            "encoder": {
                "input_height": self.encoder.input_height,
                "input_width": self.encoder.input_width,
                "block_widths": list(self.encoder.block_widths),
                "final_stride": self.encoder.final_stride,
            },
            "sampler": {
                "identities_per_batch": self.sampler.identities_per_batch,
                "images_per_identity": self.sampler.images_per_identity,
            },
            "losses": {
                "reid_weight": self.weights.reid_weight,
                "triplet_weight": self.weights.triplet_weight,
                "part_weight": self.weights.part_weight,
                "margin": self.weights.margin,
            },
            "cluster": {
                "num_clusters": self.cluster.num_clusters,
                "max_iter": self.cluster.max_iter,
                "restarts": self.cluster.restarts,
                "normalize": self.cluster.normalize,
            },
            "pretrain": {
                "epochs": self.pretrain_epochs,
                "iterations": self.pretrain_iterations,
                "lr": self.pretrain_lr,
                "lr_decay_epochs": list(self.lr_decay_epochs),
                "lr_decay_factor": self.lr_decay_factor,
            },
            "finetune": {
                "epochs": self.finetune_epochs,
                "iterations": self.finetune_iterations,
                "lr": self.finetune_lr,
                "ema_momentum": self.ema_momentum,
                "num_parts": self.num_parts,
                "reduction_ratio": self.reduction_ratio,
                "ablation": self.ablation,
            },
        }

    @classmethod
    def from_mapping(cls, mapping: dict, **overrides) -> "TrainConfig":
        run = mapping.get("run", {})
        enc = mapping.get("encoder", {})
        sam = mapping.get("sampler", {})
        los = mapping.get("losses", {})
        clu = mapping.get("cluster", {})
        pre = mapping.get("pretrain", {})
        fin = mapping.get("finetune", {})
        seed = run.get("seed", 0)
        kwargs = dict(
            encoder=EncoderConfig(
                input_height=enc.get("input_height", 64),
                input_width=enc.get("input_width", 32),
                block_widths=tuple(enc.get("block_widths", (32, 64, 128, 128))),
                final_stride=enc.get("final_stride", 1),
            ),
            sampler=SamplerConfig(
                identities_per_batch=sam.get("identities_per_batch", 16),
                images_per_identity=sam.get("images_per_identity", 4),
                seed=seed,
            ),
            weights=LossWeights(
                reid_weight=los.get("reid_weight", 1.0),
                triplet_weight=los.get("triplet_weight", 0.5),
                part_weight=los.get("part_weight", 0.5),
                margin=los.get("margin", 0.3),
            ),
            cluster=ClusterConfig(
                num_clusters=clu.get("num_clusters", 700),
                max_iter=clu.get("max_iter", 300),
                restarts=clu.get("restarts", 10),
                seed=seed,
                normalize=clu.get("normalize", True),
            ),
            pretrain_epochs=pre.get("epochs", 80),
            pretrain_iterations=pre.get("iterations", 0),
            pretrain_lr=pre.get("lr", 3.5e-4),
            lr_decay_epochs=tuple(pre.get("lr_decay_epochs", (40, 70))),
            lr_decay_factor=pre.get("lr_decay_factor", 0.1),
            finetune_epochs=fin.get("epochs", 80),
            finetune_iterations=fin.get("iterations", 400),
            finetune_lr=fin.get("lr", 3.5e-4),
            weight_decay=run.get("weight_decay", 5e-4),
            ema_momentum=fin.get("ema_momentum", 0.999),
            num_parts=fin.get("num_parts", 2),
            reduction_ratio=fin.get("reduction_ratio", 4),
            ablation=fin.get("ablation", "full"),
            seed=seed,
            dtype=run.get("dtype", "float32"),
        )
        kwargs.update(overrides)
        return cls(**kwargs)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def config_hash(self) -> str:
        canon = json.dumps(self.to_mapping(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def load_config(path, **overrides) -> tuple[TrainConfig, dict]:
    """Parse a TOML config file; returns the TrainConfig and the raw mapping
    (which may carry extra sections such as [data])."""
    with open(path, "rb") as fh:
        raw = tomli.load(fh)
    config = TrainConfig.from_mapping(raw, **overrides)
    return config, raw
