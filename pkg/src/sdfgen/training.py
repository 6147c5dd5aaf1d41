"""Adversarial training for the low- and high-frequency generators.

Both trainers share one step shape: update the discriminator unless its
accuracy on the previous step exceeded the skip threshold, then update the
generator. A skipped step leaves every discriminator array (parameters and
batch-norm statistics) bit-identical.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .models import (DEFAULT_TAU, HfgConfig, LfgConfig, ModelCheckpoint, build_models,
                     discriminator_loss, generator_adversarial_loss, l1_term)
from .nn import Adam, Tensor, frozen_stats, no_grad
from .nn import tensor as T

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainSchedule:
    lr_discriminator: float = 2e-4
    lr_generator: float = 5e-4
    skip_accuracy_threshold: float = 0.8
    batch_size: int = 8
    total_steps: int = 500
    seed: int = 0
    beta1: float = 0.5
    beta2: float = 0.999

    def __post_init__(self):
        if not 0.0 < self.skip_accuracy_threshold < 1.0:
            raise ValueError("skip_accuracy_threshold must lie in (0, 1)")
        if self.lr_discriminator <= 0 or self.lr_generator <= 0:
            raise ValueError("learning rates must be positive")
        if self.batch_size < 1 or self.total_steps < 0:
            raise ValueError("batch_size must be positive and total_steps non-negative")


@dataclass
class StepMetrics:
    step: int
    loss_d: float
    loss_g: float
    d_accuracy: float
    d_skipped: bool
    l1: Optional[float] = None

    def record(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass
class Trainer:
    """Mutable training state: models, optimizers and the seeded random streams."""

    models: ModelCheckpoint
    schedule: TrainSchedule
    opt_g: Adam = field(init=False)
    opt_d: Adam = field(init=False)
    noise: np.random.Generator = field(init=False)
    order: np.random.Generator = field(init=False)
    step: int = 0
    prev_accuracy: float = 0.0

    def __post_init__(self):
        s = self.schedule
        betas = (s.beta1, s.beta2)
        self.opt_g = Adam(self.models.generator.parameters(), s.lr_generator, betas)
        self.opt_d = Adam(self.models.discriminator.parameters(), s.lr_discriminator, betas)
        noise_seq, order_seq = np.random.SeedSequence(s.seed).spawn(2)
        self.noise = np.random.default_rng(noise_seq)
        self.order = np.random.default_rng(order_seq)

    def batches(self, n: int):
        """Endless stream of index batches, reshuffled every epoch."""
        b = min(self.schedule.batch_size, n)
        while True:
            perm = self.order.permutation(n)
            for i in range(0, n - b + 1, b):
                yield perm[i:i + b]


def _accuracy(d_real: np.ndarray, d_fake: np.ndarray) -> float:
    # patch maps are reduced to one score per sample first
    r = d_real.reshape(len(d_real), -1).mean(axis=1)
    f = d_fake.reshape(len(d_fake), -1).mean(axis=1)
    return float(((r > 0.5).sum() + (f < 0.5).sum()) / (len(r) + len(f)))


def _discriminator_phase(trainer: Trainer, real_args, fake_args, prev_d_accuracy: float):
    disc = trainer.models.discriminator
    skip = prev_d_accuracy > trainer.schedule.skip_accuracy_threshold
    if skip:
        with no_grad(), frozen_stats(disc):
            d_real = disc(*real_args)
            d_fake = disc(*fake_args)
            loss_d = discriminator_loss(d_real, d_fake)
    else:
        trainer.opt_d.zero_grad()
        d_real = disc(*real_args)
        d_fake = disc(*fake_args)
        loss_d = discriminator_loss(d_real, d_fake)
        loss_d.backward()
        trainer.opt_d.step()
    return loss_d.item(), _accuracy(d_real.data, d_fake.data), skip


def lfg_train_step(trainer: Trainer, batch: np.ndarray, prev_d_accuracy: float) -> StepMetrics:
    gen, disc = trainer.models.generator, trainer.models.discriminator
    gen.train()
    disc.train()
    real = Tensor(batch)
    z = Tensor(trainer.noise.uniform(-1.0, 1.0, (len(batch), gen.config.latent_dim)))
    fake = gen(z)
    loss_d, acc, skipped = _discriminator_phase(trainer, (real,), (fake.detach(),), prev_d_accuracy)

    trainer.opt_g.zero_grad()
    with frozen_stats(disc):
        loss_g = generator_adversarial_loss(disc(fake))
    loss_g.backward()
    trainer.opt_g.step()
    trainer.opt_d.zero_grad()
    return StepMetrics(trainer.step, loss_d, loss_g.item(), acc, skipped)


def hfg_train_step(trainer: Trainer, low: np.ndarray, high: np.ndarray, prev_d_accuracy: float) -> StepMetrics:
    gen, disc = trainer.models.generator, trainer.models.discriminator
    gen.train()
    disc.train()
    x_lf, x_hf = Tensor(low), Tensor(high)
    fake = gen(x_lf)
    loss_d, acc, skipped = _discriminator_phase(trainer, (x_lf, x_hf), (x_lf, fake.detach()), prev_d_accuracy)

    trainer.opt_g.zero_grad()
    with frozen_stats(disc):
        adv = generator_adversarial_loss(disc(x_lf, fake))
    l1 = l1_term(x_hf, fake)
    loss_g = adv + gen.config.l1_weight * l1
    loss_g.backward()
    trainer.opt_g.step()
    trainer.opt_d.zero_grad()
    return StepMetrics(trainer.step, loss_d, loss_g.item(), acc, skipped, l1.item())


def train_step(trainer: Trainer, batch, prev_d_accuracy: float) -> StepMetrics:
    """One optimization step. ``batch`` is an array (LFG) or a ``(low, high)`` pair (HFG)."""
    try:
        if trainer.models.kind == "lfg":
            m = lfg_train_step(trainer, np.asarray(batch), prev_d_accuracy)
        else:
            m = hfg_train_step(trainer, np.asarray(batch[0]), np.asarray(batch[1]), prev_d_accuracy)
    except FloatingPointError as exc:
        raise TrainingError(f"{trainer.models.kind} step {trainer.step}: {exc}") from exc
    if not (np.isfinite(m.loss_d) and np.isfinite(m.loss_g)):
        raise TrainingError(f"{trainer.models.kind} step {trainer.step}: non-finite loss {m}")
    trainer.step += 1
    trainer.prev_accuracy = m.d_accuracy
    return m


def _run(trainer: Trainer, n: int, fetch, log_path, callback) -> list[StepMetrics]:
    history = []
    sink = open(log_path, "w") if log_path else None
    try:
        batches = trainer.batches(n)
        for _ in range(trainer.schedule.total_steps):
            m = train_step(trainer, fetch(next(batches)), trainer.prev_accuracy)
            history.append(m)
            if sink:
                sink.write(json.dumps(m.record(), sort_keys=True) + "\n")
            if callback:
                callback(trainer, m)
            if m.step % 50 == 0:
                log.info("%s step %d: loss_d %.4f loss_g %.4f acc %.2f%s", trainer.models.kind, m.step,
                         m.loss_d, m.loss_g, m.d_accuracy, " (D skipped)" if m.d_skipped else "")
    finally:
        if sink:
            sink.close()
    return history


def train_lfg(dataset: np.ndarray, schedule: TrainSchedule, config: Optional[LfgConfig] = None,
              tau: float = DEFAULT_TAU, log_path=None, checkpoint_path=None, callback=None):
    """Train on network-unit fields shaped (M, R, R, R). Returns ``(checkpoint, history)``."""
    data = np.asarray(dataset, dtype=np.float64)
    if data.ndim != 4 or len(data) == 0:
        raise TrainingError("LFG dataset must be a non-empty (M, R, R, R) array")
    config = config or LfgConfig.desk()
    if data.shape[1] != config.output_resolution:
        raise TrainingError(f"dataset resolution {data.shape[1]} != generator output {config.output_resolution}")
    meta = {"tau": tau, "resolution": config.output_resolution, "schedule": asdict(schedule)}
    trainer = Trainer(build_models("lfg", config, schedule.seed, meta), schedule)
    history = _run(trainer, len(data), lambda idx: data[idx], log_path, callback)
    trainer.models.meta["steps"] = trainer.step
    if checkpoint_path:
        trainer.models.save(checkpoint_path)
    return trainer.models, history


def train_hfg(lows: np.ndarray, highs: np.ndarray, schedule: TrainSchedule, cutoff: int,
              config: Optional[HfgConfig] = None, tau: float = DEFAULT_TAU, log_path=None,
              checkpoint_path=None, callback=None):
    """Train on band pairs produced by ``split_bands`` at ``cutoff``. Returns ``(checkpoint, history)``."""
    lows = np.asarray(lows, dtype=np.float64)
    highs = np.asarray(highs, dtype=np.float64)
    if lows.ndim != 4 or len(lows) == 0 or lows.shape != highs.shape:
        raise TrainingError("HFG pairs must be two non-empty (M, R, R, R) arrays of equal shape")
    config = config or HfgConfig.for_resolution(lows.shape[1])
    meta = {"tau": tau, "resolution": config.resolution, "cutoff": int(cutoff), "schedule": asdict(schedule)}
    trainer = Trainer(build_models("hfg", config, schedule.seed, meta), schedule)
    history = _run(trainer, len(lows), lambda idx: (lows[idx], highs[idx]), log_path, callback)
    trainer.models.meta["steps"] = trainer.step
    if checkpoint_path:
        trainer.models.save(checkpoint_path)
    return trainer.models, history


def dataset_l1(models: ModelCheckpoint, lows: np.ndarray, highs: np.ndarray) -> float:
    """Mean |high - H(low)| over a pair set, generator in eval mode."""
    gen = models.generator
    was_training = gen.training
    gen.eval()
    with no_grad():
        out = gen(Tensor(lows)).data
    gen.train(was_training)
    return float(np.abs(highs - out).mean())
