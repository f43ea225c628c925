import logging
import os
from typing import Tuple

import numpy as np
import torch
from PIL import Image

from src.models.errors import InputError

logger = logging.getLogger(__name__)

# 8-bit modes that convert to RGB without loss of bit depth
CONVERTIBLE_MODES = ("L", "P", "RGBA", "LA", "CMYK", "YCbCr")


def load_image(path: str) -> np.ndarray:
    """Read an 8-bit image file as an (H, W, 3) uint8 array.

    Raises:
        InputError: if the file is missing, unreadable or not 8 bits per channel.
    """
    if not os.path.isfile(path):
        raise InputError(f"image not found: {path}")
    try:
        with Image.open(path) as img:
            if img.mode != "RGB":
                if img.mode not in CONVERTIBLE_MODES:
                    raise InputError(f"unsupported image mode {img.mode} in {path}; 8-bit RGB expected")
                logger.debug(f"Converting {path} from {img.mode} to RGB")
                img = img.convert("RGB")
            return np.asarray(img, dtype=np.uint8).copy()
    except OSError as e:
        raise InputError(f"cannot read image {path}: {e}") from e


def save_png(image: np.ndarray, path: str) -> None:
    """Write an (H, W, 3) or (H, W) uint8 array as PNG, creating parent directories."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    Image.fromarray(image).save(path, "PNG")


def image_size(path: str) -> Tuple[int, int]:
    """(height, width) without decoding the pixel data."""
    with Image.open(path) as img:
        return img.height, img.width


def check_rgb8(image: np.ndarray) -> None:
    if not isinstance(image, np.ndarray) or image.dtype != np.uint8 or image.ndim != 3 or image.shape[2] != 3:
        description = f"{image.dtype} {image.shape}" if isinstance(image, np.ndarray) else type(image).__name__
        raise InputError(f"expected an (H, W, 3) uint8 RGB image, got {description}")


def pad_image(image: np.ndarray, multiple: int) -> np.ndarray:
    """Reflect-pad the bottom and right edges up to the next multiple."""
    height, width = image.shape[:2]
    pad_h, pad_w = -height % multiple, -width % multiple
    if not pad_h and not pad_w:
        return image
    mode = "reflect" if min(height, width) > 1 else "edge"
    return np.pad(image, ((0, pad_h), (0, pad_w), (0, 0)), mode=mode)


def to_tensor(image: np.ndarray) -> torch.Tensor:
    """(H, W, 3) uint8 -> (1, 3, H, W) float32 in [0, 1]."""
    return torch.from_numpy(np.ascontiguousarray(image)).permute(2, 0, 1).unsqueeze(0).float() / 255.0


def to_image(x: torch.Tensor) -> np.ndarray:
    """(1, 3, H, W) in [0, 1] -> (H, W, 3) uint8, clamping out-of-range values."""
    x = x.detach().clamp(0.0, 1.0).squeeze(0).permute(1, 2, 0)
    return torch.round(x * 255.0).to(torch.uint8).cpu().numpy()
