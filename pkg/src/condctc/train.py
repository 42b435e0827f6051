"""Training: manual backpropagation through the encoder and expectation
conditioning, with an Adam-style optimizer.

Training always uses expectation conditioning; the committed-path modes are
inference-only because argmax and beam search are not differentiable. The
conditioning path participates in the gradient, so the back-projection
matrices are learned jointly with everything else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from condctc.core import LabelSequence
from condctc.ctc import ctc_loss_logits, inter_ctc_loss
from condctc.errors import NumericError
from condctc.model import (
    EncoderModel,
    ExpectationConditioning,
    Tape,
    forward,
    window_adjoint,
)
from condctc.seeding import stream_rng


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 16
    learning_rate: float = 2e-3
    mix_weight: float = 0.5  # weight on the intermediate losses
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be > 0")
        if not 0.0 < self.mix_weight < 1.0:
            raise ValueError("mix weight must lie in (0, 1)")


def loss_and_grads(
    model: EncoderModel, tape: Tape, target: LabelSequence, mix_weight: float
) -> tuple[float, dict[str, np.ndarray]]:
    """Mixed CTC loss for one utterance plus gradients for every parameter."""
    cfg = model.config
    p = model.params
    cond = cfg.cond_layers
    grads = {name: np.zeros_like(value) for name, value in p.items()}

    final_res = ctc_loss_logits(tape.final_logits, target)
    inter_res = {n: ctc_loss_logits(tape.cond_logits[n], target) for n in cond}
    loss = inter_ctc_loss(final_res, list(inter_res.values()), mix_weight)

    d_logits = (1.0 - mix_weight) * final_res.grad
    grads["head_final.w"] += d_logits.T @ tape.final_input
    grads["head_final.b"] += d_logits.sum(axis=0)
    g = d_logits @ p["head_final.w"]  # gradient w.r.t. the top representation

    inter_scale = mix_weight / len(cond)
    for l in range(cfg.num_layers, 0, -1):
        if l in cond:
            out = tape.layer_out[l - 1]
            z = tape.cond_probs[l]
            # conditioning branch: h = z @ w_cond.T added residually
            dh = g
            grads[f"cond{l}.w"] += dh.T @ z
            dz = dh @ p[f"cond{l}.w"]
            du = z * (dz - (dz * z).sum(axis=1, keepdims=True))  # softmax vjp
            du += inter_scale * inter_res[l].grad
            grads[f"head{l}.w"] += du.T @ out
            grads[f"head{l}.b"] += du.sum(axis=0)
            g = g + du @ p[f"head{l}.w"]
        act = tape.act[l - 1]
        d_act = g * (1.0 - act * act)
        grads[f"layer{l}.w"] += d_act.T @ tape.concat[l - 1]
        grads[f"layer{l}.b"] += d_act.sum(axis=0)
        g = g + window_adjoint(d_act @ p[f"layer{l}.w"], cfg.context_radius)

    grads["input.w"] += g.T @ tape.features
    grads["input.b"] += g.sum(axis=0)
    return loss, grads


class Adam:
    """Adam with fixed betas; parameters update in sorted-name order so the
    whole optimization is reproducible."""

    def __init__(self, params: dict[str, np.ndarray], beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(v) for name, v in params.items()}
        self.v = {name: np.zeros_like(v) for name, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> None:
        self.step_count += 1
        correction1 = 1.0 - self.beta1**self.step_count
        correction2 = 1.0 - self.beta2**self.step_count
        for name in sorted(params):
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            m_hat = self.m[name] / correction1
            v_hat = self.v[name] / correction2
            params[name] -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def train(
    model: EncoderModel,
    dataset: list[tuple[np.ndarray, LabelSequence]],
    cfg: TrainConfig,
) -> list[float]:
    """Minimize the mixed CTC objective in place; returns per-epoch mean loss."""
    if not dataset:
        raise ValueError("training dataset is empty")
    rng = stream_rng(cfg.seed, "train")
    optimizer = Adam(model.params)
    order = np.arange(len(dataset))
    epoch_losses: list[float] = []
    for epoch in range(cfg.epochs):
        rng.shuffle(order)
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            acc = {name: np.zeros_like(v) for name, v in model.params.items()}
            batch_loss = 0.0
            for idx in batch:
                features, labels = dataset[idx]
                trace = forward(model, features, ExpectationConditioning(), want_tape=True)
                loss, grads = loss_and_grads(model, trace.tape, labels, cfg.mix_weight)
                batch_loss += loss
                for name in acc:
                    acc[name] += grads[name]
            scale = 1.0 / len(batch)
            for name in acc:
                acc[name] *= scale
            optimizer.step(model.params, acc, cfg.learning_rate)
            total += batch_loss
        mean = total / len(order)
        if not math.isfinite(mean):
            raise NumericError(f"training diverged at epoch {epoch}")
        epoch_losses.append(mean)
    return epoch_losses
