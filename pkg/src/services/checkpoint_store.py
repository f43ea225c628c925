import logging
import os
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

import torch

from src.models.config import ModelConfig, TrainConfig, model_config_from_dict, train_config_from_dict
from src.models.errors import IncompatibleModelError, InputError
from src.network.sch_model import SchCompressionModel

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
LATEST_NAME = "checkpoint.pt"
BEST_NAME = "checkpoint_best.pt"


@dataclass
class Checkpoint:
    """Versioned training state with the configs needed to rebuild the model."""

    model_state: Dict[str, torch.Tensor]
    optimizer_state: Optional[Dict]
    step: int
    model_config: ModelConfig
    train_config: TrainConfig
    config_hash: int
    version: int = CHECKPOINT_VERSION


def save_checkpoint(
    path: str,
    model: SchCompressionModel,
    optimizer: Optional[torch.optim.Optimizer],
    step: int,
    train_config: TrainConfig,
) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    payload = {
        "version": CHECKPOINT_VERSION,
        "model_state": model.state_dict(),
        "optimizer_state": optimizer.state_dict() if optimizer is not None else None,
        "step": step,
        "model_config": asdict(model.config),
        "train_config": asdict(train_config),
        "config_hash": model.config.config_hash(),
    }
    torch.save(payload, path)
    logger.debug(f"Saved checkpoint at step {step} to {path}")


def load_checkpoint(path: str, map_location: str = "cpu") -> Checkpoint:
    """Read a checkpoint file.

    Raises:
        InputError: if the file is missing or not a checkpoint.
        IncompatibleModelError: if the version or the architecture hash does not match.
    """
    if not os.path.isfile(path):
        raise InputError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location=map_location, weights_only=True)
    except Exception as e:
        raise InputError(f"cannot read checkpoint {path}: {e}") from e
    if not isinstance(payload, dict) or "model_state" not in payload:
        raise InputError(f"{path} is not a codec checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise IncompatibleModelError(f"checkpoint version {payload.get('version')} is not supported")

    model_config = model_config_from_dict(payload["model_config"])
    if model_config.config_hash() != payload["config_hash"]:
        raise IncompatibleModelError(
            f"checkpoint hash {payload['config_hash']:08x} does not match its config {model_config.config_hash():08x}"
        )
    return Checkpoint(
        model_state=payload["model_state"],
        optimizer_state=payload["optimizer_state"],
        step=payload["step"],
        model_config=model_config,
        train_config=train_config_from_dict(payload["train_config"]),
        config_hash=payload["config_hash"],
        version=payload["version"],
    )


def load_model(path: str, device: str = "cpu") -> Tuple[SchCompressionModel, Checkpoint]:
    """Rebuild the model stored in a checkpoint, in eval mode."""
    checkpoint = load_checkpoint(path, map_location=device)
    model = SchCompressionModel(checkpoint.model_config)
    model.load_state_dict(checkpoint.model_state)
    logger.info(f"Loaded model from {path} (step {checkpoint.step}, config {checkpoint.config_hash:08x})")
    return model.to(device).eval(), checkpoint


class CheckpointStore:
    """Latest and best checkpoints of one training run."""

    def __init__(self, directory: str):
        self.directory = directory

    @property
    def latest_path(self) -> str:
        return os.path.join(self.directory, LATEST_NAME)

    @property
    def best_path(self) -> str:
        return os.path.join(self.directory, BEST_NAME)

    def save(self, model, optimizer, step: int, train_config: TrainConfig, best: bool = False) -> None:
        """Write the latest checkpoint and, when best is set, the best one too.

        Args:
            model: Model whose weights and config are stored.
            optimizer: Optimizer whose state is stored, or None.
            step: Training step recorded in the checkpoint.
            train_config: Training settings stored beside the model config.
            best: Also overwrite the best checkpoint.
        """
        save_checkpoint(self.latest_path, model, optimizer, step, train_config)
        if best:
            save_checkpoint(self.best_path, model, optimizer, step, train_config)
            logger.info(f"New best checkpoint at step {step}")


def default_model_path(model_dir: Optional[str] = None) -> str:
    """Best checkpoint of the model directory, falling back to the latest one."""
    store = CheckpointStore(model_dir or os.getenv("SCH_MODEL_DIR", "checkpoints"))
    return store.best_path if os.path.isfile(store.best_path) else store.latest_path
