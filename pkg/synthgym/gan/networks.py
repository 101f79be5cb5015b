"""Generator and discriminator networks."""

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import torch
from torch import nn
import torch.nn.functional as F
import torch.nn.utils.rnn as rnn_utils

from ..core.schema import DatasetSchema, Segment
from ..utils.constants import ActivationKind, DTYPE


@dataclass(frozen=True)
class LatentBatch:
    """Standard normal latent sequences (batch, T, latent_dim)."""
    z: torch.Tensor
    seed: Optional[int] = None


def sample_latent(batch: int, sequence_length: int, latent_dim: int,
                  seed: Optional[int] = None, generator: Optional[torch.Generator] = None) -> LatentBatch:
    """Draw z; the same seed gives the same z."""
    if generator is None:
        generator = torch.Generator().manual_seed(seed if seed is not None else 0)
    z = torch.randn(batch, sequence_length, latent_dim, generator=generator, dtype=DTYPE)
    return LatentBatch(z=z, seed=seed)


def apply_output_activations(logits: torch.Tensor, layout: List[Segment]) -> torch.Tensor:
    """Sigmoid on numeric dims, softmax on each class block."""
    parts = []
    for seg in layout:
        chunk = logits[..., seg.start:seg.stop]
        if seg.activation is ActivationKind.SIGMOID:
            parts.append(torch.sigmoid(chunk))
        else:
            parts.append(torch.softmax(chunk, dim=-1))
    return torch.cat(parts, dim=-1)


def sequence_mask(lengths: torch.Tensor, sequence_length: int) -> torch.Tensor:
    return torch.arange(sequence_length)[None, :] < lengths[:, None]


class SoftEmbedding(nn.Module):
    """Numeric dims pass through; each class block is projected by its own matrix."""

    def __init__(self, schema: DatasetSchema):
        super().__init__()
        self.layout = schema.activation_layout()
        self.weights = nn.ParameterList()
        for var, seg in zip(schema.variables, self.layout):
            if seg.activation is ActivationKind.SOFTMAX:
                self.weights.append(nn.Parameter(torch.zeros(seg.length, schema.embed_dim(var), dtype=DTYPE)))
        self.out_features = schema.embedded_width

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        parts = []
        blocks = iter(self.weights)
        for seg in self.layout:
            chunk = x[..., seg.start:seg.stop]
            if seg.activation is ActivationKind.SIGMOID:
                parts.append(chunk)
            else:
                parts.append(chunk @ next(blocks))
        return torch.cat(parts, dim=-1)


class Generator(nn.Module):
    """biLSTM over latent time series followed by three dense layers."""

    def __init__(self, schema: DatasetSchema):
        super().__init__()
        H = schema.hidden_dim
        self.latent_dim = schema.latent_dim
        self.layout = schema.activation_layout()
        self.bilstm = nn.LSTM(schema.latent_dim, H, batch_first=True, bidirectional=True, dtype=DTYPE)
        self.merge_dense = nn.Linear(2 * H, H, dtype=DTYPE)
        self.dense2 = nn.Linear(H, H, dtype=DTYPE)
        self.dense3 = nn.Linear(H, schema.encoded_width, dtype=DTYPE)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        if z.dim() != 3 or z.shape[-1] != self.latent_dim:
            raise ValueError(f"latent batch must be (batch, T, {self.latent_dim}), got {tuple(z.shape)}")
        h, _ = self.bilstm(z)
        h = F.relu(self.merge_dense(h))
        h = F.relu(self.dense2(h))
        return apply_output_activations(self.dense3(h), self.layout)


class Discriminator(nn.Module):
    """Soft embedding, two dense layers, biLSTM, mean pooling, and a linear score."""

    def __init__(self, schema: DatasetSchema):
        super().__init__()
        H = schema.hidden_dim
        self.encoded_width = schema.encoded_width
        self.embedding = SoftEmbedding(schema)
        self.dense1 = nn.Linear(schema.embedded_width, H, dtype=DTYPE)
        self.dense2 = nn.Linear(H, H, dtype=DTYPE)
        self.bilstm = nn.LSTM(H, H, batch_first=True, bidirectional=True, dtype=DTYPE)
        self.final_dense = nn.Linear(2 * H, 1, dtype=DTYPE)

    def forward(self, x: torch.Tensor, lengths: Optional[torch.Tensor] = None) -> torch.Tensor:
        if x.dim() != 3 or x.shape[-1] != self.encoded_width:
            raise ValueError(f"critic input must be (batch, T, {self.encoded_width}), got {tuple(x.shape)}")
        batch, T = x.shape[:2]
        if lengths is None:
            lengths = torch.full((batch,), T, dtype=torch.int64)

        h = F.relu(self.dense1(self.embedding(x)))
        h = F.relu(self.dense2(h))

        packed = rnn_utils.pack_padded_sequence(h, lengths.cpu(), batch_first=True, enforce_sorted=False)
        out, _ = self.bilstm(packed)
        out, _ = rnn_utils.pad_packed_sequence(out, batch_first=True, total_length=T)

        # mean over valid timesteps only
        mask = sequence_mask(lengths, T).to(out.dtype).unsqueeze(-1)
        pooled = (out * mask).sum(dim=1) / lengths.to(out.dtype).unsqueeze(-1)
        return self.final_dense(pooled).squeeze(-1)


def _reset_uniform(module: nn.Module, generator: torch.Generator):
    with torch.no_grad():
        for sub in module.modules():
            if isinstance(sub, nn.Linear):
                bound = 1.0 / math.sqrt(sub.in_features)
                sub.weight.uniform_(-bound, bound, generator=generator)
                sub.bias.uniform_(-bound, bound, generator=generator)
            elif isinstance(sub, nn.LSTM):
                for name, param in sub.named_parameters():
                    fan_in = param.shape[1] if name.startswith('weight') else sub.hidden_size
                    bound = 1.0 / math.sqrt(fan_in)
                    param.uniform_(-bound, bound, generator=generator)
            elif isinstance(sub, SoftEmbedding):
                for weight in sub.weights:
                    weight.normal_(0.0, 1.0, generator=generator)


def init_params(schema: DatasetSchema, seed: int) -> Tuple[Generator, Discriminator]:
    """Build both networks with seeded initial weights."""
    generator = torch.Generator().manual_seed(seed)
    gen_net = Generator(schema)
    critic = Discriminator(schema)
    _reset_uniform(gen_net, generator)
    _reset_uniform(critic, generator)
    return gen_net, critic


def generator_forward(gen_net: Generator, latent: LatentBatch) -> torch.Tensor:
    return gen_net(latent.z)


def soft_embed(critic: Discriminator, x: torch.Tensor) -> torch.Tensor:
    return critic.embedding(x)


def discriminator_forward(critic: Discriminator, x: torch.Tensor,
                          lengths: Optional[torch.Tensor] = None) -> torch.Tensor:
    return critic(x, lengths)
