import time
from typing import Iterable, List, Optional, Sequence

import numpy as np
from loguru import logger

from app.config import settings
from app.data.mnist import LabeledDataset, load_mnist
from app.models.network import ModelSpec, default_generator, predict
from app.schemas.config import InferenceMode, ScConfig
from app.schemas.report import EvalReport, EvalRow, Phase, ScLayer
from app.storage.adversarial import AdversarialRecord, load_adversarial_set
from app.storage.weights import load_weights
from app.utils.errors import UsageError

DEFAULT_SUBSET_SIZE = 1000


def adversarial_dataset(records: Sequence[AdversarialRecord]) -> LabeledDataset:
    """Successful adversarial examples labelled with their true classes"""
    kept = [r for r in records if r.success]
    if not kept:
        return LabeledDataset(np.zeros((0, 1, 28, 28), dtype=np.float32), np.zeros(0, dtype=np.int64))
    images = np.stack([np.clip(r.pixels, 0.0, 1.0) for r in kept]).astype(np.float32)
    labels = np.array([r.true_label for r in kept], dtype=np.int64)
    return LabeledDataset(images, labels)


def configure_model(model: ModelSpec, sc_layer: ScLayer, bitstream_len: int) -> ModelSpec:
    """Copy of ``model`` with SC enabled on the convolutions ``sc_layer`` names"""
    if sc_layer == ScLayer.NONE:
        return model.with_sc({})
    cfg = ScConfig(bitstream_len=bitstream_len)
    return model.with_sc({ordinal: cfg for ordinal in sc_layer.conv_ordinals})


class EvaluationService:
    """Runs the (layer, bit-stream length, phase) accuracy grid"""

    def __init__(self, model: ModelSpec, seed: int, batch_size: int = 256):
        self.model = model
        self.seed = seed
        self.batch_size = batch_size

    def evaluate_cell(self, sc_layer: ScLayer, bitstream_len: int, phase: Phase, data: LabeledDataset) -> EvalRow:
        started = time.perf_counter()
        model = configure_model(self.model, sc_layer, bitstream_len)
        mode = InferenceMode.FLOAT if sc_layer == ScLayer.NONE else InferenceMode.SC

        correct = 0
        if len(data):
            predictions = predict(model, data.images, mode, self.batch_size, default_generator())
            correct = int(np.count_nonzero(predictions == data.labels))
        accuracy = correct / len(data) if len(data) else 0.0
        elapsed = time.perf_counter() - started if settings.RECORD_WALL_TIME else 0.0

        logger.info(
            f"{sc_layer.value:>6} N={bitstream_len:<4} {phase.value}: {correct}/{len(data)} correct ({accuracy:.4f})"
        )
        return EvalRow(
            sc_layer=sc_layer,
            bitstream_len=bitstream_len,
            phase=phase,
            accuracy=accuracy,
            num_images=len(data),
            seed=self.seed,
            wall_time_s=elapsed,
        )

    def run(
        self,
        layers: Iterable[ScLayer],
        lengths: Iterable[int],
        datasets: dict,
    ) -> List[EvalRow]:
        """One row per grid cell; ``none`` contributes a single bitstream_len=0 cell per phase"""
        lengths = sorted(set(lengths))
        if not lengths:
            return []

        cells = []
        for sc_layer in sorted(set(layers), key=lambda layer: layer.order):
            for n in [0] if sc_layer == ScLayer.NONE else lengths:
                for phase in sorted(datasets, key=lambda p: p.order):
                    cells.append((sc_layer, n, phase))

        logger.info(f"Evaluating {len(cells)} grid cells")
        return [self.evaluate_cell(layer, n, phase, datasets[phase]) for layer, n, phase in cells]


def run_grid(
    model_path,
    adv_set_path,
    layers: Iterable[ScLayer],
    lengths: Iterable[int],
    subset_size: int = DEFAULT_SUBSET_SIZE,
    *,
    test_data: Optional[LabeledDataset] = None,
    seed: Optional[int] = None,
    phases: Iterable[Phase] = (Phase.BEFORE_ATTACK, Phase.AFTER_ATTACK),
) -> EvalReport:
    """Accuracy of the float and SC-enabled model on clean and adversarial images.

    BeforeAttack rows use the first ``subset_size`` clean test images;
    AfterAttack rows use every successful adversarial example in the SCAE file.
    """
    seed = settings.DEFAULT_SEED if seed is None else seed
    layers = [ScLayer(layer) for layer in layers]
    lengths = list(lengths)
    phases = set(Phase(phase) for phase in phases)
    if subset_size < 1:
        raise UsageError(f"subset_size must be positive, got {subset_size}")

    report_paths = dict(
        weights_path=str(model_path),
        adversarial_path=str(adv_set_path) if Phase.AFTER_ATTACK in phases else None,
    )
    if not lengths or not layers:
        logger.warning("Empty evaluation grid, nothing to do")
        return EvalReport(rows=[], **report_paths)

    model = load_weights(model_path)
    datasets = {}
    if Phase.AFTER_ATTACK in phases:
        datasets[Phase.AFTER_ATTACK] = adversarial_dataset(load_adversarial_set(adv_set_path))
        if len(datasets[Phase.AFTER_ATTACK]) == 0:
            logger.warning(f"{adv_set_path} holds no successful adversarial examples")
    if Phase.BEFORE_ATTACK in phases:
        if test_data is None:
            test_data = load_mnist(settings.DATA_DIR, "test")
        datasets[Phase.BEFORE_ATTACK] = test_data.subset(subset_size)

    rows = EvaluationService(model, seed).run(layers, lengths, datasets)
    return EvalReport(rows=rows, **report_paths)
