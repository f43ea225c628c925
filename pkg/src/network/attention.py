"""Window partitioning and the window-based space and channel attention blocks."""

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F
from einops import rearrange

from src.models.errors import ConfigError, DimensionError

ATTENTION_KINDS = ("space", "channel")


@dataclass
class WindowedTokens:
    """Tokens of non-overlapping windows.

    data has shape (n, L, C) with n windows (batch-major), L = window_size**2 tokens and C channels.
    grid records (H, W, window_size) of the source feature map.
    """

    data: torch.Tensor
    grid: Tuple[int, int, int]
    batched: bool = True

    @property
    def windows_per_image(self) -> int:
        height, width, window_size = self.grid
        return (height // window_size) * (width // window_size)


def window_partition(x: torch.Tensor, window_size: int) -> WindowedTokens:
    """Split a (B, C, H, W) or (C, H, W) map into window tokens of shape (n, window_size**2, C)."""
    batched = x.dim() == 4
    if not batched:
        if x.dim() != 3:
            raise DimensionError(f"window_partition expects (B, C, H, W) or (C, H, W), got {tuple(x.shape)}")
        x = x.unsqueeze(0)
    height, width = x.shape[-2:]
    if height % window_size or width % window_size:
        raise DimensionError(f"feature map {height}x{width} is not divisible by window size {window_size}")
    data = rearrange(x, "b c (nh wh) (nw ww) -> (b nh nw) (wh ww) c", wh=window_size, ww=window_size)
    return WindowedTokens(data=data, grid=(height, width, window_size), batched=batched)


def window_reverse(tokens: WindowedTokens) -> torch.Tensor:
    """Exact inverse of window_partition."""
    height, width, window_size = tokens.grid
    n, length, _ = tokens.data.shape
    if height % window_size or width % window_size or length != window_size**2:
        raise DimensionError(f"inconsistent window grid {tokens.grid} for tokens {tuple(tokens.data.shape)}")
    if n % tokens.windows_per_image:
        raise DimensionError(f"{n} windows do not tile a {height}x{width} grid with window {window_size}")
    x = rearrange(
        tokens.data,
        "(b nh nw) (wh ww) c -> b c (nh wh) (nw ww)",
        nh=height // window_size,
        nw=width // window_size,
        wh=window_size,
    )
    return x if tokens.batched else x.squeeze(0)


def cpe(x: torch.Tensor, kernel: torch.Tensor, bias: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Convolutional positional encoding: x + depthwise_conv(x).

    Args:
        x: (B, C, H, W) for a 2-D kernel of shape (C, 1, k, k), or (B, C, T) for a 1-D kernel (C, 1, k).
        kernel: Per-channel kernel.
        bias: Optional per-channel bias.
    """
    padding = kernel.shape[-1] // 2
    conv = F.conv2d if kernel.dim() == 4 else F.conv1d
    return x + conv(x, kernel, bias, padding=padding, groups=x.shape[1])


class ConvPositionalEncoding(nn.Module):
    """Residual depthwise convolution, zero-initialized so it starts as identity."""

    def __init__(self, channels: int, kernel_size: int = 3, spatial_dims: int = 2):
        super().__init__()
        conv = nn.Conv2d if spatial_dims == 2 else nn.Conv1d
        self.proj = conv(channels, channels, kernel_size, padding=kernel_size // 2, groups=channels)
        nn.init.zeros_(self.proj.weight)
        nn.init.zeros_(self.proj.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return cpe(x, self.proj.weight, self.proj.bias)


class Mlp(nn.Module):
    """Two-layer GELU feed-forward applied to the last dimension.

    Args:
        dim: Token width, kept at the output.
        hidden: Width of the inner layer.
    """

    def __init__(self, dim: int, hidden: int):
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(self.act(self.fc1(x)))


class SpaceAttention(nn.Module):
    """Multi-head self-attention over the spatial tokens of each window."""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads:
            raise ConfigError(f"space attention width {dim} is not divisible by heads={heads}")
        self.heads = heads
        self.scale = (dim // heads) ** -0.5
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)
        self.keep_attention = False
        self.last_attention: Optional[torch.Tensor] = None

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        """Attend among the L spatial tokens of every window.

        Args:
            tokens: (n, L, C) window tokens.

        Returns:
            (n, L, C) tensor. The (n, heads, L, L) attention is kept in last_attention when keep_attention is set.
        """
        q, k, v = rearrange(self.qkv(tokens), "n l (three h d) -> three n h l d", three=3, h=self.heads)
        attn = torch.softmax((q @ k.transpose(-2, -1)) * self.scale, dim=-1)
        if self.keep_attention:
            self.last_attention = attn.detach()
        out = rearrange(attn @ v, "n h l d -> n l (h d)")
        return self.proj(out)


class ChannelAttention(nn.Module):
    """Self-attention among the channel tokens of each window.

    Tokens are transposed to (n, C, L) so every channel is a token described by its L spatial values.
    The projections act along L and are shared by all channel tokens. With head_layout="channels" the
    heads split the channel tokens into groups; with "tokens" they split the L axis and every head
    attends over all C channels.
    """

    def __init__(
        self,
        dim: int,
        window_size: int,
        heads: int,
        head_layout: str = "channels",
        logit_scale: Optional[float] = None,
    ):
        super().__init__()
        length = window_size**2
        if head_layout not in ("channels", "tokens"):
            raise ConfigError(f"unknown channel head layout {head_layout!r}")
        if head_layout == "channels" and dim % heads:
            raise ConfigError(f"channel attention width {dim} is not divisible by heads={heads}")
        if head_layout == "tokens" and length % heads:
            raise ConfigError(f"window area {length} is not divisible by heads={heads}")
        self.heads = heads
        self.head_layout = head_layout
        feature_dim = length if head_layout == "channels" else length // heads
        self.scale = logit_scale if logit_scale is not None else feature_dim**-0.5
        self.qkv = nn.Linear(length, 3 * length)
        self.proj = nn.Linear(length, length)
        self.keep_attention = False
        self.last_attention: Optional[torch.Tensor] = None

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        if self.head_layout == "channels":
            return rearrange(x, "n (h c) l -> n h c l", h=self.heads)
        return rearrange(x, "n c (h l) -> n h c l", h=self.heads)

    def _merge(self, x: torch.Tensor) -> torch.Tensor:
        if self.head_layout == "channels":
            return rearrange(x, "n h c l -> n (h c) l")
        return rearrange(x, "n h c l -> n c (h l)")

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        q, k, v = (self._split(part) for part in self.qkv(tokens.transpose(1, 2)).chunk(3, dim=-1))
        attn = torch.softmax((q @ k.transpose(-2, -1)) * self.scale, dim=-1)
        if self.keep_attention:
            self.last_attention = attn.detach()
        out = self.proj(self._merge(attn @ v))
        return out.transpose(1, 2)


def space_attention_core(tokens: WindowedTokens, core: SpaceAttention) -> WindowedTokens:
    return replace(tokens, data=core(tokens.data))


def channel_attention_core(tokens: WindowedTokens, core: ChannelAttention) -> WindowedTokens:
    return replace(tokens, data=core(tokens.data))


class WindowAttentionBlock(nn.Module):
    """CPE -> LayerNorm -> attention -> residual -> CPE -> LayerNorm -> MLP -> residual.

    The space kind works on (B, C, H, W) maps, partitioning into windows only around the attention core.
    The channel kind works entirely in the window layout, where CPE, LayerNorm and MLP act on the
    window_size**2 axis.
    """

    def __init__(
        self,
        dim: int,
        window_size: int,
        heads: int,
        kind: str = "space",
        mlp_ratio: float = 2.0,
        head_layout: str = "channels",
        logit_scale: Optional[float] = None,
    ):
        super().__init__()
        if kind not in ATTENTION_KINDS:
            raise ConfigError(f"attention kind must be one of {ATTENTION_KINDS}, got {kind!r}")
        self.kind = kind
        self.window_size = window_size
        if kind == "space":
            width, spatial_dims = dim, 2
            self.core = SpaceAttention(dim, heads)
        else:
            width, spatial_dims = window_size**2, 1
            self.core = ChannelAttention(dim, window_size, heads, head_layout, logit_scale)
        self.cpe0 = ConvPositionalEncoding(width, spatial_dims=spatial_dims)
        self.norm1 = nn.LayerNorm(width)
        self.cpe1 = ConvPositionalEncoding(width, spatial_dims=spatial_dims)
        self.norm2 = nn.LayerNorm(width)
        self.mlp = Mlp(width, int(width * mlp_ratio))

    def _forward_space(self, x: torch.Tensor) -> torch.Tensor:
        x = self.cpe0(x)
        tokens = window_partition(x, self.window_size)
        attended = tokens.data + self.core(self.norm1(tokens.data))
        x = self.cpe1(window_reverse(replace(tokens, data=attended)))
        y = rearrange(x, "b c h w -> b h w c")
        y = y + self.mlp(self.norm2(y))
        return rearrange(y, "b h w c -> b c h w")

    def _forward_channel(self, x: torch.Tensor) -> torch.Tensor:
        tokens = window_partition(x, self.window_size)
        u = self.cpe0(tokens.data)
        u = u + self.core(self.norm1(u.transpose(1, 2)).transpose(1, 2))
        u = self.cpe1(u)
        u = u + self.mlp(self.norm2(u.transpose(1, 2))).transpose(1, 2)
        return window_reverse(replace(tokens, data=u))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if self.kind == "space":
            return self._forward_space(x)
        return self._forward_channel(x)
