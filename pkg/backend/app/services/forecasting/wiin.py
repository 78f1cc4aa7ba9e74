"""
Wildfire Imagery Information Net (WIIN).

A ResNet-lite stage shrinks a 100x100 tile to a single-channel 10x10 map
(spatial trace 51 -> 26 -> 26 -> 13 -> 10). A small pre-norm transformer (WIT)
embeds 2x2 patches of that map, prepends a learnable token and emits two
scalars per tile: a token feature and an image feature.
"""

from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from sklearn.decomposition import PCA

from app.exceptions import DimensionError
from app.models.configs import ResNetConfig, WITConfig
from app.nn import BatchNorm, Conv2d, Dropout, LayerNorm, Linear, MaxPool2d, Module, Tensor, concat, parameter
from app.nn import functional as F
from app.utils.logging_config import get_logger

logger = get_logger("wiin")


# ------------------------------------------------------------------ ResNet

class ResidualUnit(Module):
    """
    z = relu(F(x) + shortcut(x)).

    F is conv-bn (depth 1) or conv-bn-relu-conv-bn (depth 2). The shortcut is
    the identity unless the shape changes, then a strided 1x1 conv.
    """

    def __init__(self, in_channels: int, out_channels: int, stride: int, depth: int, rng: np.random.Generator):
        super().__init__()
        self.conv1 = Conv2d(in_channels, out_channels, 3, rng, stride=stride, padding=1)
        self.bn1 = BatchNorm(out_channels)
        self.conv2 = Conv2d(out_channels, out_channels, 3, rng, stride=1, padding=1) if depth == 2 else None
        self.bn2 = BatchNorm(out_channels) if depth == 2 else None
        self.shortcut = None
        if stride != 1 or in_channels != out_channels:
            self.shortcut = Conv2d(in_channels, out_channels, 1, rng, stride=stride, padding=0)

    def forward(self, x: Tensor) -> Tensor:
        y = self.bn1(self.conv1(x))
        if self.conv2 is not None:
            y = self.bn2(self.conv2(F.relu(y)))
        identity = x if self.shortcut is None else self.shortcut(x)
        return F.relu(y + identity)


class ResNetLite(Module):
    def __init__(self, config: ResNetConfig, rng: np.random.Generator):
        super().__init__()
        self.config = config
        self.stem_conv = Conv2d(1, config.stem_channels, 5, rng, stride=2, padding=3)
        self.stem_bn = BatchNorm(config.stem_channels)
        self.stem_pool = MaxPool2d(3, 2, 1)
        self.block1 = [
            ResidualUnit(config.stem_channels if i == 0 else config.block1_channels,
                         config.block1_channels, 1, 1, rng)
            for i in range(config.block1_units)
        ]
        self.block2 = ResidualUnit(config.block1_channels, config.block2_channels, 2, 2, rng)
        self.final_pool = MaxPool2d(4, 1, 0)
        self.collapse = Conv2d(config.block2_channels, 1, 1, rng)
        self._trace: List[int] = []
        self._stem_map: Optional[np.ndarray] = None

    @property
    def last_trace(self) -> List[int]:
        """Spatial size after stem conv, stem pool, block 1, block 2, final pool."""
        return list(self._trace)

    def forward(self, images: Tensor) -> Tensor:
        size = self.config.image_size
        if images.ndim != 4 or images.shape[1] != 1 or images.shape[2:] != (size, size):
            raise DimensionError(f"expected (B, 1, {size}, {size}) tiles, got {images.shape}")
        trace = []
        z = self.stem_conv(images)
        trace.append(z.shape[-1])
        self._stem_map = z.data
        z = self.stem_pool(F.relu(self.stem_bn(z)))
        trace.append(z.shape[-1])
        for unit in self.block1:
            z = unit(z)
        trace.append(z.shape[-1])
        z = self.block2(z)
        trace.append(z.shape[-1])
        z = self.final_pool(z)
        trace.append(z.shape[-1])
        self._trace = trace
        return self.collapse(z)


# --------------------------------------------------------------------- WIT

class PatchEmbedding(Module):
    """Strided conv patches, learnable token in front, learnable positions added."""

    def __init__(self, config: WITConfig, map_size: int, rng: np.random.Generator):
        super().__init__()
        if map_size % config.patch_size:
            raise DimensionError(f"map size {map_size} not divisible by patch size {config.patch_size}")
        self.patch_size = config.patch_size
        self.num_patches = (map_size // config.patch_size) ** 2
        self.proj = Conv2d(1, config.hidden_dim, config.patch_size, rng, stride=config.patch_size)
        bound = 1.0 / np.sqrt(config.hidden_dim)
        self.token = parameter(rng.uniform(-bound, bound, size=(1, 1, config.hidden_dim)))
        self.position = parameter(np.zeros((self.num_patches + 1, config.hidden_dim)))

    def forward(self, fmap: Tensor) -> Tensor:
        b, _, h, w = fmap.shape
        if h % self.patch_size or w % self.patch_size:
            raise DimensionError(f"{h}x{w} map cannot be cut into {self.patch_size}x{self.patch_size} patches")
        patches = self.proj(fmap)
        d = patches.shape[1]
        patches = patches.reshape(b, d, -1).transpose(0, 2, 1)
        if patches.shape[1] != self.num_patches:
            raise DimensionError(f"expected {self.num_patches} patches, got {patches.shape[1]}")
        token = self.token + Tensor(np.zeros((b, 1, d)))
        return concat([token, patches], axis=1) + self.position


class MultiHeadAttention(Module):
    """softmax(Q K^T / sqrt(d_head)) V per head, heads concatenated and projected."""

    def __init__(self, config: WITConfig, rng: np.random.Generator):
        super().__init__()
        d = config.hidden_dim
        self.heads = config.heads
        self.head_dim = config.head_dim
        self.query = Linear(d, d, rng)
        self.key = Linear(d, d, rng)
        self.value = Linear(d, d, rng)
        self.out = Linear(d, d, rng)
        self._last_attention: Optional[np.ndarray] = None

    @property
    def last_attention(self) -> Optional[np.ndarray]:
        """(B, heads, T, T) weights of the latest forward pass."""
        return self._last_attention

    def split_heads(self, t: Tensor) -> Tensor:
        b, n, _ = t.shape
        return t.reshape(b, n, self.heads, self.head_dim)

    def forward(self, x: Tensor) -> Tensor:
        b, n, d = x.shape
        q = self.split_heads(self.query(x)).transpose(0, 2, 1, 3)
        k = self.split_heads(self.key(x)).transpose(0, 2, 1, 3)
        v = self.split_heads(self.value(x)).transpose(0, 2, 1, 3)
        scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / np.sqrt(self.head_dim))
        weights = F.softmax_rows(scores)
        self._last_attention = weights.data
        z = (weights @ v).transpose(0, 2, 1, 3).reshape(b, n, d)
        return self.out(z)


class WITBlock(Module):
    """Pre-norm block: x + MSA(LN(x)), then x + MLP(LN(x))."""

    def __init__(self, config: WITConfig, rng: np.random.Generator, dropout_seed: int):
        super().__init__()
        self.norm1 = LayerNorm(config.hidden_dim)
        self.attention = MultiHeadAttention(config, rng)
        self.norm2 = LayerNorm(config.hidden_dim)
        self.fc1 = Linear(config.hidden_dim, config.mlp_neurons, rng)
        self.dropout = Dropout(config.dropout, seed=dropout_seed)
        self.fc2 = Linear(config.mlp_neurons, config.hidden_dim, rng)

    def forward(self, x: Tensor) -> Tensor:
        x = x + self.attention(self.norm1(x))
        h = self.fc2(self.dropout(F.gelu(self.fc1(self.norm2(x)))))
        return x + h


class WIT(Module):
    """Transformer stage producing [token_feature, image_feature] per tile."""

    def __init__(self, config: WITConfig, rng: np.random.Generator, map_size: int = 10, seed: int = 0):
        super().__init__()
        self.config = config
        self.embedding = PatchEmbedding(config, map_size, rng)
        self.blocks = [WITBlock(config, rng, dropout_seed=seed + i) for i in range(config.layers)]
        self.token_norm = LayerNorm(config.hidden_dim)
        self.token_head = Linear(config.hidden_dim, 1, rng)
        self.image_conv = Conv2d(config.hidden_dim, 1, (1, 3), rng, stride=1, padding=(0, 1))
        self.image_head = Linear(self.embedding.num_patches, 1, rng)

    def encode(self, fmap: Tensor) -> Tensor:
        z = self.embedding(fmap)
        for block in self.blocks:
            z = block(z)
        return z

    def forward(self, fmap: Tensor) -> Tensor:
        z = self.encode(fmap)
        b, n, d = z.shape
        token = self.token_head(self.token_norm(z[:, 0, :]))
        patches = z[:, 1:, :].transpose(0, 2, 1).reshape(b, d, 1, n - 1)
        image = self.image_head(self.image_conv(patches).reshape(b, n - 1))
        return concat([token, image], axis=1)


class WIIN(Module):
    """ResNet-lite followed by WIT: (B, 1, 100, 100) -> (B, 2)."""

    def __init__(self, resnet: ResNetConfig, wit: WITConfig, rng: np.random.Generator, seed: int = 0):
        super().__init__()
        self.resnet = ResNetLite(resnet, rng)
        self.wit = WIT(wit, rng, map_size=10, seed=seed)

    def forward(self, images: Tensor) -> Tensor:
        return self.wit(self.resnet(images))


# ---------------------------------------------------------- entry points

def resnet_forward(resnet: ResNetLite, images: Tensor, training: bool = False) -> Tensor:
    resnet.train(training)
    return resnet(images)


def patch_embed(embedding: PatchEmbedding, fmap: Tensor) -> Tensor:
    return embedding(fmap)


def attention(mha: MultiHeadAttention, x: Tensor) -> Tensor:
    return mha(x)


def wit_block(block: WITBlock, x: Tensor, training: bool = False) -> Tensor:
    block.train(training)
    return block(x)


def wit_forward(wit: WIT, fmap: Tensor, training: bool = False) -> Tensor:
    wit.train(training)
    return wit(fmap)


def _normalise(values: np.ndarray) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi - lo <= 0.0:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def dump_feature_maps(wiin: WIIN, image: np.ndarray, directory: Union[str, Path], stem: str) -> List[Path]:
    """
    Write the stem convolution output and the final 10x10 map of one tile as PGM.

    Multi-channel maps are reduced to their first principal component across
    channels, then min-max scaled to [0, 1].
    """
    from app.services.data_processor import write_gray_image

    directory = Path(directory)
    wiin.eval()
    final = wiin.resnet(Tensor(np.asarray(image, dtype=np.float64).reshape(1, 1, *image.shape[-2:])))
    stem_map = wiin.resnet._stem_map[0]
    c, h, w = stem_map.shape
    if c > 1:
        pixels = stem_map.reshape(c, h * w).T
        component = PCA(n_components=1).fit_transform(pixels)[:, 0].reshape(h, w)
    else:
        component = stem_map[0]

    written = [
        write_gray_image(_normalise(component), directory / f"{stem}_stem.pgm"),
        write_gray_image(_normalise(final.data[0, 0]), directory / f"{stem}_final.pgm"),
    ]
    logger.debug(f"Wrote feature maps for tile {stem} to {directory}")
    return written
