"""Backbone encoder, horizontal partitioning, pooling and the per-part / classifier heads.

The encoder is a small convolutional stack that maps an RGB image to a
channels x height x width feature map. The last stage keeps stride 1 so the
map stays tall enough to split into horizontal parts.
"""

from dataclasses import dataclass

import torch
from torch import nn

from .errors import ConfigError, InputError


@dataclass(frozen=True)
class EncoderConfig:
    """Shape contract of the encoder.

    ``block_widths`` lists the output channels of each conv block; every block
    except the last downsamples by 2, the last uses ``final_stride``. The
    channel count of the produced feature map is ``block_widths[-1]``.
    """

    input_height: int = 64
    input_width: int = 32
    block_widths: tuple[int, ...] = (32, 64, 128, 128)
    final_stride: int = 1

    def __post_init__(self):
        if not self.block_widths or any(w < 1 for w in self.block_widths):
            raise ConfigError("block widths must be positive")
        if self.final_stride < 1:
            raise ConfigError("final stride must be >= 1")
        down = 2 ** (len(self.block_widths) - 1) * self.final_stride
        if self.input_height % down or self.input_width % down:
            raise ConfigError(
                f"input {self.input_height}x{self.input_width} not divisible "
                f"by total downsampling factor {down}"
            )

    @property
    def channels(self) -> int:
        return self.block_widths[-1]

    @property
    def map_height(self) -> int:
        return self.input_height // (2 ** (len(self.block_widths) - 1) * self.final_stride)

    @property
    def map_width(self) -> int:
        return self.input_width // (2 ** (len(self.block_widths) - 1) * self.final_stride)


class Encoder(nn.Module):
    """Conv -> BN -> ReLU stack producing the global feature map."""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        layers = []
        in_ch = 3
        last = len(config.block_widths) - 1
        for i, width in enumerate(config.block_widths):
            stride = config.final_stride if i == last else 2
            layers += [
                nn.Conv2d(in_ch, width, kernel_size=3, stride=stride, padding=1, bias=False),
                nn.BatchNorm2d(width),
                nn.ReLU(inplace=True),
            ]
            in_ch = width
        self.blocks = nn.Sequential(*layers)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        """Encode a (3,H,W) image or a (B,3,H,W) batch into feature maps."""
        single = images.dim() == 3
        if single:
            images = images.unsqueeze(0)
        if images.dim() != 4 or images.shape[1] != 3:
            raise InputError(f"expected (B,3,H,W) images, got {tuple(images.shape)}")
        cfg = self.config
        if images.shape[2] != cfg.input_height or images.shape[3] != cfg.input_width:
            raise InputError(
                f"expected {cfg.input_height}x{cfg.input_width} input, "
                f"got {images.shape[2]}x{images.shape[3]}"
            )
        out = self.blocks(images)
        return out.squeeze(0) if single else out


def split_horizontal(fmap: torch.Tensor, num_parts: int) -> list[torch.Tensor]:
    """Split a feature map into ``num_parts`` equal horizontal bands, top to bottom.

    Works on (C,H,W) maps and (B,C,H,W) batches; concatenating the parts along
    the height axis reproduces the input exactly.
    """
    h_axis = fmap.dim() - 2
    height = fmap.shape[h_axis]
    if num_parts < 1:
        raise ConfigError("num_parts must be >= 1")
    if height % num_parts:
        raise ConfigError(f"height {height} not divisible by {num_parts} parts")
    return list(torch.split(fmap, height // num_parts, dim=h_axis))


def global_avg_pool(fmap: torch.Tensor) -> torch.Tensor:
    """Spatial mean per channel; (C,H,W) -> (C,) and (B,C,H,W) -> (B,C)."""
    if fmap.dim() < 3:
        raise InputError("feature map must have at least 3 dims")
    return fmap.mean(dim=(-2, -1))


class ExpertHead(nn.Module):
    """Per-part embedding head: fully connected layer followed by batch norm."""

    def __init__(self, channels: int):
        super().__init__()
        self.fc = nn.Linear(channels, channels)
        self.bn = nn.BatchNorm1d(channels)

    def forward(self, vecs: torch.Tensor) -> torch.Tensor:
        single = vecs.dim() == 1
        if single:
            vecs = vecs.unsqueeze(0)
        if not self.training and bool((self.bn.running_var <= 0).any()):
            raise RuntimeError("expert head running variance is not positive")
        out = self.bn(self.fc(vecs))
        return out.squeeze(0) if single else out


class ClassifierHead(nn.Module):
    """Linear logits over (pseudo-)identities."""

    def __init__(self, channels: int, num_classes: int):
        if num_classes < 2:
            raise ConfigError("classifier needs at least 2 classes")
        super().__init__()
        self.fc = nn.Linear(channels, num_classes)
        self.num_classes = num_classes

    def forward(self, vecs: torch.Tensor) -> torch.Tensor:
        return self.fc(vecs)


class ReIDNet(nn.Module):
    """Encoder plus per-part expert heads and a swappable classifier.

    The global embedding is the pooled unsplit map (no expert head); part
    embeddings pass through their expert head. The classifier is replaced
    whenever the identity vocabulary changes.
    """

    def __init__(self, config: EncoderConfig, num_parts: int, num_classes: int | None = None):
        super().__init__()
        if config.map_height % num_parts:
            raise ConfigError(
                f"map height {config.map_height} not divisible by {num_parts} parts"
            )
        self.config = config
        self.num_parts = num_parts
        self.encoder = Encoder(config)
        self.experts = nn.ModuleList(ExpertHead(config.channels) for _ in range(num_parts))
        self.classifier = (
            ClassifierHead(config.channels, num_classes) if num_classes else None
        )

    def set_classifier(self, num_classes: int) -> None:
        head = ClassifierHead(self.config.channels, num_classes)
        head.to(dtype=next(self.encoder.parameters()).dtype)
        self.classifier = head

    def feature_map(self, images: torch.Tensor) -> torch.Tensor:
        return self.encoder(images)

    def global_embedding(self, fmap: torch.Tensor) -> torch.Tensor:
        return global_avg_pool(fmap)

    def part_pooled(self, fmap: torch.Tensor) -> list[torch.Tensor]:
        """Pooled raw part vectors (expert head not applied)."""
        return [global_avg_pool(p) for p in split_horizontal(fmap, self.num_parts)]

    def part_embeddings(self, fmap: torch.Tensor) -> list[torch.Tensor]:
        """Expert-head outputs, one per horizontal part."""
        return [
            expert(pooled)
            for expert, pooled in zip(self.experts, self.part_pooled(fmap))
        ]
