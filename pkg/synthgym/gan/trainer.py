"""GAN training loop: 5:1 critic schedule, curriculum over sequence length, checkpoints."""

import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import torch

from .checkpoint import save_checkpoint
from .losses import critic_loss, generator_loss
from .networks import Discriminator, Generator, init_params, sample_latent
from ..core.config import TrainConfig, derive_seed
from ..core.preprocess import EncodedTensor
from ..core.schema import DatasetSchema
from ..utils.constants import CHECKPOINT_NAME, DIVERGENCE_LIMIT, DIVERGENCE_PATIENCE, DTYPE, TRAIN_LOG_NAME
from ..utils.errors import EmptyDatasetError, TrainingDivergedError
from ..utils.logging_config import logger


@dataclass
class EpochRecord:
    """One line of the training log."""
    epoch: int
    stage: int
    sequence_length: int
    critic_loss: float
    wasserstein: float
    gradient_penalty: float
    gradient_norm: float
    generator_loss: Optional[float]
    alignment: Optional[float]
    critic_updates: int
    generator_updates: int
    wall_time: float


def _mean(values: List[float]) -> Optional[float]:
    return sum(values) / len(values) if values else None


def _apply_gradients(optimizer: torch.optim.Optimizer, module: torch.nn.Module, gradients: Dict[str, torch.Tensor]):
    optimizer.zero_grad(set_to_none=True)
    for name, param in module.named_parameters():
        if name in gradients:
            param.grad = gradients[name]
    optimizer.step()


class GanTrainer:
    """Trains a generator/critic pair on an encoded tensor."""

    def __init__(self, schema: DatasetSchema, config: TrainConfig):
        self.schema = schema
        self.config = config
        self.stages = config.resolved_curriculum(schema.sequence_length)
        self.epoch_callbacks: List[Callable[[EpochRecord], None]] = []
        self.critic_updates = 0
        self.generator_updates = 0
        self.records: List[EpochRecord] = []

    def add_epoch_callback(self, callback: Callable[[EpochRecord], None]):
        """Add callback run after every epoch with its record."""
        self.epoch_callbacks.append(callback)

    def _notify(self, record: EpochRecord):
        for callback in self.epoch_callbacks:
            try:
                callback(record)
            except Exception as e:
                logger.error(f"Epoch callback error: {e}")

    def _check_divergence(self, record: EpochRecord, streak: int) -> int:
        magnitudes = [abs(record.critic_loss)]
        if record.generator_loss is not None:
            magnitudes.append(abs(record.generator_loss))
        streak = streak + 1 if max(magnitudes) > DIVERGENCE_LIMIT else 0
        if streak >= DIVERGENCE_PATIENCE:
            raise TrainingDivergedError(
                f"loss magnitude above {DIVERGENCE_LIMIT:g} for {streak} consecutive epochs (epoch {record.epoch})"
            )
        return streak

    def train(self, encoded: EncodedTensor,
              out_dir: Optional[str] = None) -> Tuple[Generator, Discriminator, List[EpochRecord]]:
        """Run every curriculum stage; checkpoints and the JSON-lines log go to `out_dir`."""
        if encoded.n_patients == 0:
            raise EmptyDatasetError("training data", "encoded tensor has no patients")
        cfg = self.config
        seed = cfg.seed if cfg.seed is not None else 0

        gen_net, critic = init_params(self.schema, seed)
        rng = torch.Generator().manual_seed(derive_seed(seed, 'batches'))
        opt_d = torch.optim.Adam(critic.parameters(), lr=cfg.learning_rate, betas=(cfg.adam_beta1, cfg.adam_beta2))
        opt_g = torch.optim.Adam(gen_net.parameters(), lr=cfg.learning_rate, betas=(cfg.adam_beta1, cfg.adam_beta2))

        data = torch.as_tensor(encoded.data, dtype=DTYPE)
        lengths = torch.as_tensor(encoded.lengths, dtype=torch.int64)
        out = Path(out_dir) if out_dir else None
        log_file = None
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            log_file = open(out / TRAIN_LOG_NAME, 'w', encoding='utf-8')

        logger.info(f"Training on {encoded.n_patients} patients, curriculum {self.stages}, seed {seed}")
        epoch = 0
        streak = 0
        try:
            for stage, (seq_len, span) in enumerate(self.stages):
                x_stage = data[:, :seq_len]
                len_stage = lengths.clamp(max=seq_len)
                for _ in range(span):
                    epoch += 1
                    record = self._run_epoch(gen_net, critic, opt_d, opt_g, x_stage, len_stage, rng,
                                             epoch, stage, seq_len)
                    self.records.append(record)
                    if log_file is not None:
                        log_file.write(json.dumps(asdict(record)) + '\n')
                        log_file.flush()
                    logger.debug(f"Epoch {epoch}: L_D={record.critic_loss:.6g} L_G={record.generator_loss}")
                    self._notify(record)
                    streak = self._check_divergence(record, streak)

                    if out is not None and epoch % cfg.checkpoint_every == 0:
                        save_checkpoint(str(out / CHECKPOINT_NAME), self.schema, gen_net, critic, epoch)
        finally:
            if log_file is not None:
                log_file.close()

        if out is not None:
            save_checkpoint(str(out / CHECKPOINT_NAME), self.schema, gen_net, critic, epoch)
        logger.info(f"Training finished after {epoch} epochs "
                    f"({self.critic_updates} critic / {self.generator_updates} generator updates)")
        return gen_net, critic, self.records

    def _run_epoch(self, gen_net, critic, opt_d, opt_g, x_stage, len_stage, rng, epoch, stage, seq_len) -> EpochRecord:
        cfg = self.config
        started = time.perf_counter()
        d_losses, wass, penalties, norms, g_losses, alignments = [], [], [], [], [], []

        order = torch.randperm(x_stage.shape[0], generator=rng)
        for idx in order.split(cfg.batch_size):
            x_real, lens = x_stage[idx], len_stage[idx]
            latent = sample_latent(len(idx), seq_len, self.schema.latent_dim, generator=rng)
            epsilon = torch.rand(len(idx), generator=rng, dtype=DTYPE)
            d_result = critic_loss(critic, gen_net, x_real, latent, cfg.lambda_gp, lens,
                                   epsilon=epsilon, gp_at=cfg.gp_at)
            _apply_gradients(opt_d, critic, d_result.gradients)
            self.critic_updates += 1
            d_losses.append(d_result.loss)
            wass.append(d_result.terms['wasserstein'])
            penalties.append(d_result.terms['gradient_penalty'])
            norms.append(d_result.terms['gradient_norm_mean'])

            if self.critic_updates % cfg.critic_steps_per_gen == 0:
                latent = sample_latent(len(idx), seq_len, self.schema.latent_dim, generator=rng)
                g_result = generator_loss(critic, gen_net, latent, x_real, self.schema, cfg.lambda_corr, lens)
                _apply_gradients(opt_g, gen_net, g_result.gradients)
                self.generator_updates += 1
                g_losses.append(g_result.loss)
                alignments.append(g_result.terms['alignment'])

        return EpochRecord(
            epoch=epoch,
            stage=stage,
            sequence_length=seq_len,
            critic_loss=_mean(d_losses),
            wasserstein=_mean(wass),
            gradient_penalty=_mean(penalties),
            gradient_norm=_mean(norms),
            generator_loss=_mean(g_losses),
            alignment=_mean(alignments),
            critic_updates=self.critic_updates,
            generator_updates=self.generator_updates,
            wall_time=time.perf_counter() - started,
        )


def train(encoded: EncodedTensor, config: TrainConfig, out_dir: Optional[str] = None):
    """Convenience wrapper around GanTrainer."""
    return GanTrainer(encoded.schema, config).train(encoded, out_dir)
