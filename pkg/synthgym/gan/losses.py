"""WGAN-GP critic loss, correlation alignment loss, and the generator loss."""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import torch
from torch import nn

from .networks import LatentBatch, sequence_mask
from ..core.schema import DatasetSchema, Segment
from ..utils.constants import ActivationKind, DTYPE, GradientPenaltyPoint
from ..utils.errors import NonFiniteLossError

VARIANCE_FLOOR = 1e-12

Critic = Callable[[torch.Tensor, Optional[torch.Tensor]], torch.Tensor]


@dataclass
class LossResult:
    """Loss value, its named terms, and gradients keyed by parameter name.

    Critic results also carry the per-sample input-gradient norms the penalty was taken over.
    """
    loss: float
    terms: Dict[str, float] = field(default_factory=dict)
    gradients: Dict[str, torch.Tensor] = field(default_factory=dict)
    input_gradient_norms: Optional[torch.Tensor] = None


def _as_tensor(x) -> torch.Tensor:
    return torch.as_tensor(x, dtype=DTYPE)


def _full_lengths(x: torch.Tensor) -> torch.Tensor:
    return torch.full((x.shape[0],), x.shape[1], dtype=torch.int64)


def mask_padding(x: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
    return x * sequence_mask(lengths, x.shape[1]).to(x.dtype).unsqueeze(-1)


def _check_finite(terms: Dict[str, torch.Tensor]):
    for name, value in terms.items():
        if not torch.isfinite(value).all():
            raise NonFiniteLossError(name, float(value.detach()))


def _named_gradients(loss: torch.Tensor, module) -> Dict[str, torch.Tensor]:
    if not isinstance(module, nn.Module):
        return {}
    named = [(name, p) for name, p in module.named_parameters() if p.requires_grad]
    if not named:
        return {}
    grads = torch.autograd.grad(loss, [p for _, p in named], allow_unused=True)
    return {
        name: (torch.zeros_like(p) if g is None else g.detach())
        for (name, p), g in zip(named, grads)
    }


def input_gradient_norms(critic: Critic, x_real: torch.Tensor, x_syn: torch.Tensor,
                         lengths: Optional[torch.Tensor] = None,
                         epsilon: Optional[torch.Tensor] = None,
                         at: GradientPenaltyPoint = GradientPenaltyPoint.INTERPOLATES,
                         rng: Optional[torch.Generator] = None) -> torch.Tensor:
    """Per-sample ||grad_x D(x)||_2 at interpolates or at the synthetic batch, kept differentiable."""
    batch = x_real.shape[0]
    if at is GradientPenaltyPoint.SYNTHETIC:
        x_hat = x_syn.detach().clone()
    else:
        if epsilon is None:
            epsilon = torch.rand(batch, generator=rng, dtype=x_real.dtype)
        eps = epsilon.view(-1, 1, 1)
        x_hat = eps * x_real.detach() + (1.0 - eps) * x_syn.detach()
    x_hat.requires_grad_(True)

    scores = critic(x_hat, lengths)
    grads, = torch.autograd.grad(scores.sum(), x_hat, create_graph=True)
    return torch.linalg.vector_norm(grads.reshape(batch, -1), dim=1)


def gradient_penalty(critic: Critic, x_real: torch.Tensor, x_syn: torch.Tensor,
                     lengths: Optional[torch.Tensor] = None,
                     epsilon: Optional[torch.Tensor] = None,
                     at: GradientPenaltyPoint = GradientPenaltyPoint.INTERPOLATES,
                     rng: Optional[torch.Generator] = None) -> torch.Tensor:
    """Mean of (||grad_x D(x)||_2 - 1)^2 at interpolates or at the synthetic batch."""
    norms = input_gradient_norms(critic, x_real, x_syn, lengths, epsilon=epsilon, at=at, rng=rng)
    return ((norms - 1.0) ** 2).mean()


def critic_loss(critic: Critic, gen_net: Callable, x_real, latent: LatentBatch,
                lambda_gp: float, lengths: Optional[torch.Tensor] = None,
                epsilon: Optional[torch.Tensor] = None,
                gp_at: GradientPenaltyPoint = GradientPenaltyPoint.INTERPOLATES,
                rng: Optional[torch.Generator] = None) -> LossResult:
    """L_D = E[D(G(z))] - E[D(x_real)] + lambda_gp * gradient penalty."""
    x_real = _as_tensor(x_real)
    if lengths is None:
        lengths = _full_lengths(x_real)
    with torch.no_grad():
        x_syn = mask_padding(gen_net(latent.z), lengths)

    wasserstein = critic(x_syn, lengths).mean() - critic(x_real, lengths).mean()
    norms = input_gradient_norms(critic, x_real, x_syn, lengths, epsilon=epsilon, at=gp_at, rng=rng)
    penalty = ((norms - 1.0) ** 2).mean()
    loss = wasserstein + lambda_gp * penalty
    _check_finite({'wasserstein': wasserstein, 'gradient_penalty': penalty})

    return LossResult(
        loss=float(loss.detach()),
        terms={
            'wasserstein': float(wasserstein.detach()),
            'gradient_penalty': float(penalty.detach()),
            'gradient_norm_mean': float(norms.detach().mean()),
        },
        gradients=_named_gradients(loss, critic),
        input_gradient_norms=norms.detach(),
    )


def variable_summaries(x: torch.Tensor, layout: List[Segment]) -> torch.Tensor:
    """One scalar per variable: numeric value, or the probability-weighted class index."""
    columns = []
    for seg in layout:
        chunk = x[..., seg.start:seg.stop]
        if seg.activation is ActivationKind.SIGMOID:
            columns.append(chunk[..., 0])
        else:
            ranks = torch.arange(seg.length, dtype=x.dtype)
            columns.append((chunk * ranks).sum(dim=-1))
    return torch.stack(columns, dim=-1)


def pearson_matrix(rows: torch.Tensor) -> torch.Tensor:
    """Pearson r between columns; pairs touching a zero-variance column get 0."""
    centred = rows - rows.mean(dim=0, keepdim=True)
    cov = centred.T @ centred / rows.shape[0]
    var = torch.diagonal(cov)
    usable = var > VARIANCE_FLOOR
    std = torch.sqrt(torch.where(usable, var, torch.ones_like(var)))
    r = cov / (std[:, None] * std[None, :])
    keep = (usable[:, None] & usable[None, :]).to(rows.dtype)
    return r * keep


def _valid_rows(x: torch.Tensor, schema: DatasetSchema, lengths: Optional[torch.Tensor]) -> torch.Tensor:
    summaries = variable_summaries(x, schema.activation_layout())
    if lengths is None:
        return summaries.reshape(-1, schema.n_variables)
    return summaries[sequence_mask(lengths, x.shape[1])]


def alignment_loss(x_syn, x_real, schema: DatasetSchema,
                   lengths_syn: Optional[torch.Tensor] = None,
                   lengths_real: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Sum over unordered variable pairs of |r_syn - r_real|."""
    x_syn, x_real = _as_tensor(x_syn), _as_tensor(x_real)
    if x_syn.numel() == 0 or x_real.numel() == 0:
        raise ValueError("alignment loss needs nonempty batches")
    r_syn = pearson_matrix(_valid_rows(x_syn, schema, lengths_syn))
    r_real = pearson_matrix(_valid_rows(x_real.detach(), schema, lengths_real))
    rows, cols = torch.tril_indices(schema.n_variables, schema.n_variables, offset=-1)
    return (r_syn[rows, cols] - r_real[rows, cols]).abs().sum()


def generator_loss(critic: Critic, gen_net: nn.Module, latent: LatentBatch, x_real,
                   schema: DatasetSchema, lambda_corr: float,
                   lengths: Optional[torch.Tensor] = None) -> LossResult:
    """L_G = -E[D(G(z))] + lambda_corr * alignment loss."""
    x_real = _as_tensor(x_real)
    if lengths is None:
        lengths = _full_lengths(x_real)
    x_syn = mask_padding(gen_net(latent.z), lengths)

    adversarial = -critic(x_syn, lengths).mean()
    alignment = alignment_loss(x_syn, x_real, schema, lengths, lengths)
    loss = adversarial + lambda_corr * alignment
    _check_finite({'adversarial': adversarial, 'alignment': alignment})

    return LossResult(
        loss=float(loss.detach()),
        terms={'adversarial': float(adversarial.detach()), 'alignment': float(alignment.detach())},
        gradients=_named_gradients(loss, gen_net),
    )
