import logging
import os
from typing import Iterator, List, Sequence, Tuple

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset

from src.models.errors import InputError
from src.utils.image_io import image_size, load_image, to_tensor

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")


def list_images(directory: str, extensions: Sequence[str] = IMAGE_EXTENSIONS) -> List[str]:
    """Sorted image paths directly inside a directory."""
    if not os.path.isdir(directory):
        raise InputError(f"image directory not found: {directory}")
    paths = [
        os.path.join(directory, name)
        for name in sorted(os.listdir(directory))
        if name.lower().endswith(tuple(extensions))
    ]
    if not paths:
        raise InputError(f"no images with extensions {tuple(extensions)} in {directory}")
    return paths


class CropDataset(Dataset):
    """Square crops of images, random per (seed, epoch, index) or centered.

    Images smaller than the crop are skipped with a warning.
    """

    def __init__(self, paths: Sequence[str], crop_size: int, seed: int = 0, random_crop: bool = True):
        self.crop_size = crop_size
        self.seed = seed
        self.random_crop = random_crop
        self.epoch = 0
        self.items: List[Tuple[str, int, int]] = []
        for path in paths:
            height, width = image_size(path)
            if height < crop_size or width < crop_size:
                logger.warning(f"Skipping {path}: {width}x{height} is smaller than the {crop_size} crop")
                continue
            self.items.append((path, height, width))
        if not self.items:
            raise InputError(f"none of {len(paths)} images is at least {crop_size}x{crop_size}")

    def __len__(self) -> int:
        return len(self.items)

    def set_epoch(self, epoch: int):
        self.epoch = epoch

    def crop_origin(self, index: int) -> Tuple[int, int]:
        _, height, width = self.items[index]
        if not self.random_crop:
            return (height - self.crop_size) // 2, (width - self.crop_size) // 2
        rng = np.random.default_rng([self.seed, self.epoch, index])
        top = int(rng.integers(0, height - self.crop_size + 1))
        left = int(rng.integers(0, width - self.crop_size + 1))
        return top, left

    def __getitem__(self, index: int) -> torch.Tensor:
        path = self.items[index][0]
        top, left = self.crop_origin(index)
        image = load_image(path)[top : top + self.crop_size, left : left + self.crop_size]
        return to_tensor(image).squeeze(0)


def crop_pipeline(
    paths: Sequence[str], crop_size: int, seed: int, batch_size: int = 8, num_workers: int = 0
) -> Iterator[torch.Tensor]:
    """Endless stream of (B, 3, crop, crop) batches in [0, 1], reproducible for a given seed."""
    dataset = CropDataset(paths, crop_size, seed)
    logger.info(f"Training on {len(dataset)} images with {crop_size}x{crop_size} crops")
    epoch = 0
    while True:
        dataset.set_epoch(epoch)
        generator = torch.Generator().manual_seed(seed + epoch)
        loader = DataLoader(
            dataset,
            batch_size=min(batch_size, len(dataset)),
            shuffle=True,
            drop_last=True,
            generator=generator,
            num_workers=num_workers,
        )
        yield from loader
        epoch += 1


def center_crops(paths: Sequence[str], crop_size: int, batch_size: int = 8) -> List[torch.Tensor]:
    """Fixed evaluation batches of centered crops."""
    dataset = CropDataset(paths, crop_size, random_crop=False)
    return list(DataLoader(dataset, batch_size=batch_size, shuffle=False))
