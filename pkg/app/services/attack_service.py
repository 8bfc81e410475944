"""Targeted Carlini-Wagner L2 attack against the float network.

The optimization variable lives in tanh space, x' = (tanh(w) + 1) / 2, so
every iterate is a valid image. For each image the objective
||x' - x||^2 + c * max(max_{i != t} Z_i - Z_t, -kappa) is minimized by plain
gradient descent while c is binary-searched; the smallest-L2 successful
iterate seen anywhere in the search is kept.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from app.data.mnist import LabeledDataset
from app.models.network import ModelSpec, backward, cw_margin, forward, predict
from app.models.tensor import l2_distance
from app.schemas.config import AttackConfig, LossKind
from app.schemas.report import AttackSummary
from app.storage.adversarial import AdversarialRecord
from app.utils.errors import AttackNumericalError, UsageError

TANH_CLAMP = 1e-6


@dataclass
class AttackResult:
    x_original: np.ndarray
    x_adv: np.ndarray
    true_label: int
    target: int
    success: bool
    l2: float
    final_c: float

    def to_record(self) -> AdversarialRecord:
        return AdversarialRecord(
            true_label=self.true_label,
            target=self.target,
            success=self.success,
            l2=self.l2,
            pixels=self.x_adv.astype(np.float32),
        )


def to_tanh_space(x: np.ndarray) -> np.ndarray:
    scaled = np.clip(2.0 * x.astype(np.float64) - 1.0, -1.0 + TANH_CLAMP, 1.0 - TANH_CLAMP)
    return np.arctanh(scaled)


def from_tanh_space(w: np.ndarray) -> np.ndarray:
    return np.clip((np.tanh(w) + 1.0) / 2.0, 0.0, 1.0)


def is_adversarial(logits: np.ndarray, targets: np.ndarray, kappa: float) -> np.ndarray:
    """argmax is the target and the target logit leads the runner-up by at least kappa"""
    return (logits.argmax(axis=1) == targets) & (-cw_margin(logits, targets) >= kappa)


def confirm_adversarial(model: ModelSpec, x_adv: np.ndarray, target: int, kappa: float) -> bool:
    """Re-check one stored image on its own so the verdict does not depend on batch composition"""
    _, logits = forward(model, x_adv.astype(np.float32)[None])
    return bool(is_adversarial(logits, np.array([target]), kappa)[0])


def _sum_per_image(values: np.ndarray) -> np.ndarray:
    return values.reshape(len(values), -1).sum(axis=1)


def cw_l2_attack_batch(
    model: ModelSpec,
    images: np.ndarray,
    true_labels: Sequence[int],
    cfg: Optional[AttackConfig] = None,
) -> List[AttackResult]:
    """Attack every image of a (B, C, H, W) batch with its own constant c"""
    cfg = cfg or AttackConfig()
    x0 = np.asarray(images, dtype=np.float32)
    if x0.ndim != len(model.input_shape) + 1:
        raise UsageError(f"Expected a batch of images, got shape {x0.shape}")
    if x0.min(initial=0.0) < 0 or x0.max(initial=0.0) > 1:
        raise UsageError("Attack inputs must lie in [0, 1]")
    true_labels = np.asarray(true_labels, dtype=np.int64)
    batch = len(x0)
    targets = np.array([cfg.target_for(label, model.num_classes) for label in true_labels], dtype=np.int64)
    kappa = cfg.confidence_kappa
    per_image = (slice(None),) + (None,) * (x0.ndim - 1)

    best_l2sq = np.full(batch, np.inf)
    best_adv = x0.copy()
    best_c = np.full(batch, cfg.initial_c)

    # an input that already satisfies the target needs no perturbation
    _, logits0 = forward(model, x0)
    done = is_adversarial(logits0, targets, kappa)
    best_l2sq[done] = 0.0

    lower = np.zeros(batch)
    upper = np.full(batch, np.inf)
    c = np.full(batch, cfg.initial_c)
    w0 = to_tanh_space(x0)
    check_every = max(1, cfg.max_iterations // 10)

    for search_step in range(cfg.binary_search_steps):
        active = ~done
        if not active.any():
            break
        w = w0.copy()
        found = np.zeros(batch, dtype=bool)
        previous = np.full(batch, np.inf)

        for iteration in range(cfg.max_iterations):
            x_adv = from_tanh_space(w).astype(np.float32)
            grads = backward(model, x_adv, targets, LossKind.CW_OBJECTIVE, kappa=kappa, need_param_grads=False)
            diff = x_adv.astype(np.float64) - x0
            l2sq = _sum_per_image(diff * diff)

            success = is_adversarial(grads.logits, targets, kappa) & active
            improved = success & (l2sq < best_l2sq)
            best_l2sq[improved] = l2sq[improved]
            best_adv[improved] = x_adv[improved]
            best_c[improved] = c[improved]
            found |= success

            grad_x = 2.0 * diff + c[per_image] * grads.input.astype(np.float64)
            grad_w = grad_x * (1.0 - np.tanh(w) ** 2) / 2.0
            if not np.all(np.isfinite(grad_w)):
                logger.error(f"Non-finite attack gradient at search step {search_step}, iteration {iteration}")
                raise AttackNumericalError(
                    f"Non-finite gradient at search step {search_step}, iteration {iteration}"
                )
            w[active] -= cfg.step_size * grad_w[active]

            if cfg.abort_early and (iteration + 1) % check_every == 0:
                objective = l2sq + c * grads.losses
                stalled = objective > previous * 0.9999
                if np.all(stalled[active]):
                    logger.debug(f"Search step {search_step}: aborting early at iteration {iteration}")
                    break
                previous = objective

        for e in np.flatnonzero(active):
            if found[e]:
                upper[e] = min(upper[e], c[e])
                c[e] = (lower[e] + upper[e]) / 2
            else:
                lower[e] = max(lower[e], c[e])
                c[e] = (lower[e] + upper[e]) / 2 if np.isfinite(upper[e]) else c[e] * cfg.c_growth
        logger.debug(
            f"Search step {search_step}: {int(np.isfinite(best_l2sq).sum())}/{batch} images have an adversarial example"
        )

    results = []
    for e in range(batch):
        success = bool(np.isfinite(best_l2sq[e]))
        if success and not confirm_adversarial(model, best_adv[e], int(targets[e]), kappa):
            logger.warning(f"Image {e} lost its target margin on a single-image forward pass; recording a failure")
            success = False
        x_adv = best_adv[e] if success else x0[e]
        results.append(
            AttackResult(
                x_original=x0[e],
                x_adv=x_adv,
                true_label=int(true_labels[e]),
                target=int(targets[e]),
                success=success,
                l2=l2_distance(x0[e], x_adv),
                final_c=float(best_c[e] if success else c[e]),
            )
        )
    return results


def cw_l2_attack(
    model: ModelSpec, x: np.ndarray, true_label: int, cfg: Optional[AttackConfig] = None
) -> AttackResult:
    return cw_l2_attack_batch(model, np.asarray(x)[None], [true_label], cfg)[0]


def summarize(results: Sequence[AttackResult], seed: int) -> AttackSummary:
    distances = [r.l2 for r in results if r.success]
    succeeded = len(distances)
    return AttackSummary(
        attempted=len(results),
        succeeded=succeeded,
        success_rate=succeeded / len(results) if results else 0.0,
        mean_l2=float(np.mean(distances)) if distances else None,
        median_l2=float(np.median(distances)) if distances else None,
        seed=seed,
    )


class AttackService:
    """Builds the adversarial set from correctly classified test images"""

    def __init__(self, config: Optional[AttackConfig] = None, batch_size: int = 50):
        if batch_size < 1:
            raise UsageError(f"Attack batch size must be positive, got {batch_size}")
        self.config = config or AttackConfig()
        self.batch_size = batch_size

    def select_correct(self, model: ModelSpec, data: LabeledDataset, count: int) -> LabeledDataset:
        """First ``count`` test images the float model classifies correctly"""
        predictions = predict(model, data.images)
        correct = np.flatnonzero(predictions == data.labels)[:count]
        if len(correct) < count:
            logger.warning(f"Only {len(correct)} correctly classified images available (asked for {count})")
        return LabeledDataset(data.images[correct], data.labels[correct])

    def run(self, model: ModelSpec, data: LabeledDataset, count: int, seed: int) -> Tuple[List[AttackResult], AttackSummary]:
        selected = self.select_correct(model, data, count)
        logger.info(f"Attacking {len(selected)} images (batch size {self.batch_size})")

        results: List[AttackResult] = []
        for start in range(0, len(selected), self.batch_size):
            stop = start + self.batch_size
            batch_results = cw_l2_attack_batch(
                model, selected.images[start:stop], selected.labels[start:stop], self.config
            )
            results.extend(batch_results)
            succeeded = sum(r.success for r in results)
            logger.info(f"Attacked {len(results)}/{len(selected)} images, {succeeded} succeeded")

        for index, result in enumerate(results):
            if not result.success:
                logger.warning(f"No adversarial example found for image {index} (label {result.true_label})")

        summary = summarize(results, seed)
        logger.info(
            f"Attack success rate {summary.success_rate:.3f}"
            + (f", mean L2 {summary.mean_l2:.3f}" if summary.mean_l2 is not None else "")
        )
        return results, summary
