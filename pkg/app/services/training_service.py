import time
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from loguru import logger

from app.config import settings
from app.data.mnist import LabeledDataset
from app.models.network import ModelSpec, backward, build_lenet5, predict
from app.schemas.config import InferenceMode, LossKind, TrainConfig
from app.schemas.report import EpochMetrics
from app.utils.errors import TrainingDivergedError, UsageError
from app.utils.rng import make_rng


@dataclass
class TrainingResult:
    model: ModelSpec
    metrics: List[EpochMetrics]


def accuracy(model: ModelSpec, data: LabeledDataset, mode: InferenceMode = InferenceMode.FLOAT) -> float:
    if len(data) == 0:
        return 0.0
    predictions = predict(model, data.images, mode)
    return float(np.count_nonzero(predictions == data.labels)) / len(data)


class TrainingService:
    """Mini-batch SGD with momentum on the float network"""

    def __init__(self, config: Optional[TrainConfig] = None):
        self.config = config or TrainConfig()

    def initialize(self, num_classes: int = 10) -> ModelSpec:
        """LeNet-5 with Kaiming-uniform weights drawn from the seeded init stream"""
        return build_lenet5(num_classes, rng=make_rng(self.config.seed, "init"))

    def train(
        self,
        model: ModelSpec,
        data: LabeledDataset,
        test_data: Optional[LabeledDataset] = None,
    ) -> TrainingResult:
        cfg = self.config
        if len(data) == 0:
            raise UsageError("Cannot train on an empty dataset")
        if cfg.train_subset is not None:
            data = data.subset(cfg.train_subset)

        logger.info(
            f"Training on {len(data)} images: epochs={cfg.epochs}, batch={cfg.batch_size}, "
            f"lr={cfg.learning_rate}, momentum={cfg.momentum}, seed={cfg.seed}"
        )
        shuffle_rng = make_rng(cfg.seed, "shuffle")
        params = [{k: np.array(v, dtype=np.float32) for k, v in p.items()} for p in model.params()]
        velocity = [{k: np.zeros_like(v) for k, v in p.items()} for p in params]
        metrics: List[EpochMetrics] = []

        for epoch in range(1, cfg.epochs + 1):
            started = time.perf_counter()
            order = shuffle_rng.permutation(len(data)) if cfg.shuffle else np.arange(len(data))
            losses = []

            for batch_index, start in enumerate(range(0, len(data), cfg.batch_size)):
                idx = order[start : start + cfg.batch_size]
                grads = backward(model, data.images[idx], data.labels[idx], LossKind.CROSS_ENTROPY)
                loss = grads.loss
                if not np.isfinite(loss):
                    logger.error(f"Loss became {loss} at epoch {epoch}, batch {batch_index}")
                    raise TrainingDivergedError(epoch, batch_index, loss)
                losses.append(loss * len(idx))

                for p, v, g in zip(params, velocity, grads.params):
                    for name in p:
                        v[name] *= cfg.momentum
                        v[name] += g[name]
                        p[name] -= cfg.learning_rate * v[name]
                model = model.with_params(params)

            train_loss = float(np.sum(losses) / len(data))
            test_accuracy = accuracy(model, test_data) if test_data is not None else None
            elapsed = time.perf_counter() - started if settings.RECORD_WALL_TIME else 0.0
            metrics.append(
                EpochMetrics(epoch=epoch, train_loss=train_loss, test_accuracy=test_accuracy, wall_time_s=elapsed)
            )
            logger.info(
                f"Epoch {epoch}/{cfg.epochs}: train_loss={train_loss:.4f}"
                + (f", test_accuracy={test_accuracy:.4f}" if test_accuracy is not None else "")
            )

        return TrainingResult(model=model, metrics=metrics)


def train(
    model: ModelSpec,
    data: LabeledDataset,
    cfg: Optional[TrainConfig] = None,
    test_data: Optional[LabeledDataset] = None,
) -> TrainingResult:
    return TrainingService(cfg).train(model, data, test_data)
