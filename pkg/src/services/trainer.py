import json
import logging
import math
import os
from dataclasses import asdict, dataclass
from typing import Iterator, List, Optional, Sequence

import torch

from src.models.config import TrainConfig
from src.network.sch_model import SchCompressionModel
from src.services.checkpoint_store import CheckpointStore
from src.utils.metrics import psnr_from_mse

logger = logging.getLogger(__name__)

PIXEL_MAX = 255.0
LOG_NAME = "train_log.ndjson"


@dataclass
class RDLoss:
    """Rate-distortion loss with its components; loss == bpp + lmbda * distortion."""

    loss: torch.Tensor
    bpp: torch.Tensor
    distortion: torch.Tensor


def rd_loss(
    x: torch.Tensor, x_hat: torch.Tensor, rate_y_bits: torch.Tensor, rate_z_bits: torch.Tensor, lmbda: float
) -> RDLoss:
    """Lagrangian RD loss on [0, 1] images.

    Distortion is the MSE on the 8-bit scale (255^2 * MSE), rate is in bits per pixel of the batch.
    """
    batch, _, height, width = x.shape
    bpp = (rate_y_bits.sum() + rate_z_bits.sum()) / (batch * height * width)
    distortion = PIXEL_MAX**2 * torch.mean((x - x_hat) ** 2)
    return RDLoss(loss=bpp + lmbda * distortion, bpp=bpp, distortion=distortion)


class PlateauSchedule:
    """Multiplies the learning rate by `factor` after `patience` evaluations without a new best loss."""

    def __init__(self, initial_lr: float, factor: float = 0.3, patience: int = 5, min_lr: float = 1e-7):
        self.lr = initial_lr
        self.factor = factor
        self.patience = patience
        self.min_lr = min_lr
        self.best = math.inf
        self.bad_evals = 0

    def step(self, loss: float) -> float:
        if loss < self.best:
            self.best = loss
            self.bad_evals = 0
            return self.lr
        self.bad_evals += 1
        if self.bad_evals >= self.patience:
            new_lr = max(self.lr * self.factor, self.min_lr)
            if new_lr < self.lr:
                logger.info(f"Eval loss flat for {self.bad_evals} evaluations, lr {self.lr:.3g} -> {new_lr:.3g}")
            self.lr = new_lr
            self.bad_evals = 0
        return self.lr


def lr_schedule(
    history: Sequence[float], initial_lr: float = 1e-4, factor: float = 0.3, patience: int = 5, min_lr: float = 1e-7
) -> float:
    """Learning rate after replaying a history of eval losses through the plateau rule."""
    schedule = PlateauSchedule(initial_lr, factor, patience, min_lr)
    for loss in history:
        schedule.step(loss)
    return schedule.lr


@dataclass
class StepResult:
    step: int
    loss: float
    bpp: float
    distortion: float
    lr: float


@dataclass
class EvalResult:
    step: int
    loss: float
    bpp: float
    distortion: float
    psnr: float


class Trainer:
    """Adam training loop for one lambda, with plateau decay, evaluation and checkpoints."""

    def __init__(
        self,
        model: SchCompressionModel,
        train_config: TrainConfig,
        output_dir: Optional[str] = None,
        device: str = "cpu",
    ):
        self.model = model.to(device)
        self.config = train_config.validate()
        self.device = device
        self.lmbda = model.config.lmbda
        trainable = [p for p in self.model.parameters() if p.requires_grad]
        self.optimizer = torch.optim.Adam(trainable, lr=train_config.learning_rate)
        self.schedule = PlateauSchedule(
            train_config.learning_rate,
            train_config.plateau_factor,
            train_config.plateau_patience,
            train_config.min_learning_rate,
        )
        self.output_dir = output_dir
        self.store = CheckpointStore(output_dir) if output_dir else None
        self.step = 0
        self.best_eval = math.inf
        self.evaluations: List[EvalResult] = []

    @property
    def lr(self) -> float:
        return self.optimizer.param_groups[0]["lr"]

    def _set_lr(self, lr: float):
        for group in self.optimizer.param_groups:
            group["lr"] = lr

    def train_step(self, batch: torch.Tensor) -> StepResult:
        """One Adam update on a (B, 3, H, W) batch in [0, 1]."""
        self.model.train()
        x = batch.to(self.device)
        self.optimizer.zero_grad()
        out = self.model(x, noise=True)
        result = rd_loss(x, out.x_hat, out.y_bits, out.z_bits, self.lmbda)
        result.loss.backward()
        if self.config.clip_max_norm > 0:
            torch.nn.utils.clip_grad_norm_(self.model.parameters(), self.config.clip_max_norm)
        self.optimizer.step()
        self.step += 1
        return StepResult(
            step=self.step,
            loss=result.loss.item(),
            bpp=result.bpp.item(),
            distortion=result.distortion.item(),
            lr=self.lr,
        )

    @torch.no_grad()
    def evaluate(self, batches: List[torch.Tensor]) -> EvalResult:
        """Mean loss, bpp, distortion and PSNR with rounded latents over fixed batches."""
        self.model.eval()
        totals = {"loss": 0.0, "bpp": 0.0, "distortion": 0.0}
        count = 0
        for batch in batches:
            x = batch.to(self.device)
            out = self.model(x, noise=False)
            result = rd_loss(x, out.x_hat.clamp(0.0, 1.0), out.y_bits, out.z_bits, self.lmbda)
            size = x.shape[0]
            totals["loss"] += result.loss.item() * size
            totals["bpp"] += result.bpp.item() * size
            totals["distortion"] += result.distortion.item() * size
            count += size
        means = {key: value / max(count, 1) for key, value in totals.items()}
        return EvalResult(step=self.step, psnr=psnr_from_mse(means["distortion"]), **means)

    def _log(self, record: dict):
        if not self.output_dir:
            return
        os.makedirs(self.output_dir, exist_ok=True)
        with open(os.path.join(self.output_dir, LOG_NAME), "a") as f:
            f.write(json.dumps(record) + "\n")

    def _after_eval(self, result: EvalResult):
        self.evaluations.append(result)
        logger.info(
            f"eval step={result.step} loss={result.loss:.4f} bpp={result.bpp:.4f} "
            f"psnr={result.psnr:.2f} lr={self.lr:.3g}"
        )
        self._log({"split": "eval", "lr": self.lr, **asdict(result)})
        improved = result.loss < self.best_eval
        if improved:
            self.best_eval = result.loss
        self._set_lr(self.schedule.step(result.loss))
        if self.store:
            self.store.save(self.model, self.optimizer, self.step, self.config, best=improved)

    def fit(
        self, batches: Iterator[torch.Tensor], eval_batches: Optional[List[torch.Tensor]] = None
    ) -> List[StepResult]:
        """Train until max_steps, evaluating every eval_period steps.

        Returns:
            The per-step results, in order.
        """
        history = []
        for batch in batches:
            if self.step >= self.config.max_steps:
                break
            result = self.train_step(batch)
            history.append(result)
            if not math.isfinite(result.loss):
                logger.warning(f"Non-finite loss at step {result.step}")
            if result.step % self.config.log_period == 0 or result.step == 1:
                logger.info(
                    f"step={result.step} loss={result.loss:.4f} bpp={result.bpp:.4f} "
                    f"distortion={result.distortion:.2f} lr={result.lr:.3g}"
                )
                self._log({"split": "train", **asdict(result)})
            if eval_batches and result.step % self.config.eval_period == 0:
                self._after_eval(self.evaluate(eval_batches))

        evaluated_last = bool(eval_batches) and self.step % self.config.eval_period == 0
        if eval_batches and not evaluated_last:
            self._after_eval(self.evaluate(eval_batches))
        elif self.store and not eval_batches:
            self.store.save(self.model, self.optimizer, self.step, self.config)
        logger.info(f"Finished training at step {self.step}")
        return history
