import numpy as np
import pytest
import torch

from synthgym.gan.losses import (
    alignment_loss,
    critic_loss,
    generator_loss,
    gradient_penalty,
    input_gradient_norms,
    pearson_matrix,
    variable_summaries,
)
from synthgym.gan.networks import init_params, sample_latent
from synthgym.utils.constants import DTYPE, GradientPenaltyPoint
from synthgym.utils.errors import NonFiniteLossError

from conftest import binary, categorical, make_schema, numeric

T, O = 4, 6


def constant_generator(value=0.5):
    return lambda z: torch.full((z.shape[0], T, O), value, dtype=DTYPE)


def zero_critic(x, lengths=None):
    return (x * 0.0).sum(dim=(1, 2))


def linear_critic(weight):
    return lambda x, lengths=None: (x * weight).sum(dim=(1, 2))


def test_zero_critic_penalty_equals_lambda():
    x_real = torch.rand(8, T, O, dtype=DTYPE)
    result = critic_loss(zero_critic, constant_generator(), x_real, sample_latent(8, T, 3, seed=0), lambda_gp=10.0)
    assert result.terms['wasserstein'] == 0.0
    assert result.terms['gradient_penalty'] == pytest.approx(1.0)
    assert result.loss == pytest.approx(10.0)
    assert result.gradients == {}


@pytest.mark.parametrize("at", list(GradientPenaltyPoint))
def test_unit_gradient_critic_has_no_penalty(at):
    weight = torch.rand(T, O, dtype=DTYPE)
    weight = weight / torch.linalg.vector_norm(weight)
    x_real = torch.rand(5, T, O, dtype=DTYPE)
    x_syn = torch.rand(5, T, O, dtype=DTYPE)
    penalty = gradient_penalty(linear_critic(weight), x_real, x_syn, at=at)
    assert float(penalty) == pytest.approx(0.0, abs=1e-20)


def test_wasserstein_term_of_linear_critic():
    weight = torch.ones(T, O, dtype=DTYPE)
    x_real = torch.zeros(3, T, O, dtype=DTYPE)
    result = critic_loss(linear_critic(weight), constant_generator(0.25), x_real,
                         sample_latent(3, T, 3, seed=0), lambda_gp=0.0)
    assert result.terms['wasserstein'] == pytest.approx(0.25 * T * O)


def test_penalty_uses_given_epsilon():
    weight = 2.0 * torch.ones(T, O, dtype=DTYPE) / np.sqrt(T * O)
    x_real = torch.rand(2, T, O, dtype=DTYPE)
    x_syn = torch.rand(2, T, O, dtype=DTYPE)
    # gradient norm is 2 everywhere, so every interpolate gives (2 - 1)^2
    penalty = gradient_penalty(linear_critic(weight), x_real, x_syn, epsilon=torch.tensor([0.0, 1.0], dtype=DTYPE))
    assert float(penalty) == pytest.approx(1.0)


def test_critic_gradients_are_keyed_by_parameter(mixed_schema):
    gen_net, critic = init_params(mixed_schema, seed=1)
    x_real = torch.rand(4, T, O, dtype=DTYPE)
    result = critic_loss(critic, gen_net, x_real, sample_latent(4, T, 3, seed=2), lambda_gp=10.0,
                         lengths=torch.tensor([4, 3, 2, 1]), rng=torch.Generator().manual_seed(0))
    assert set(result.gradients) == {name for name, _ in critic.named_parameters()}
    assert all(torch.isfinite(g).all() for g in result.gradients.values())


def test_non_finite_critic_names_the_term():
    nan_critic = lambda x, lengths=None: x.sum(dim=(1, 2)) * float('nan')
    with pytest.raises(NonFiniteLossError) as err:
        critic_loss(nan_critic, constant_generator(), torch.rand(2, T, O, dtype=DTYPE),
                    sample_latent(2, T, 3, seed=0), lambda_gp=1.0)
    assert err.value.term == 'wasserstein'


def test_variable_summaries(mixed_schema):
    x = torch.tensor([[[0.3, 0.2, 0.8, 0.1, 0.2, 0.7]]], dtype=DTYPE)
    out = variable_summaries(x, mixed_schema.activation_layout()).numpy().ravel()
    np.testing.assert_allclose(out, [0.3, 0.8, 0.2 + 2 * 0.7])


def test_pearson_matrix_zero_variance_column():
    rows = torch.tensor([[1.0, 5.0, 2.0], [2.0, 5.0, 4.0], [3.0, 5.0, 7.0]], dtype=DTYPE)
    r = pearson_matrix(rows).numpy()
    assert r[0, 1] == 0.0 and r[1, 2] == 0.0
    assert r[0, 2] == pytest.approx(np.corrcoef(rows[:, 0].numpy(), rows[:, 2].numpy())[0, 1])


def _two_numeric_schema():
    return make_schema([numeric('a'), numeric('b')])


def test_alignment_of_identical_batches_is_zero(mixed_schema):
    x = torch.rand(6, T, O, dtype=DTYPE)
    assert float(alignment_loss(x, x, mixed_schema)) == pytest.approx(0.0, abs=1e-12)


def test_alignment_of_opposite_correlations_is_two():
    a = torch.rand(10, T, 1, dtype=DTYPE)
    x_syn = torch.cat([a, a], dim=-1)
    x_real = torch.cat([a, 1.0 - a], dim=-1)
    assert float(alignment_loss(x_syn, x_real, _two_numeric_schema())) == pytest.approx(2.0)


def test_alignment_matches_naive_sum(mixed_schema):
    gen = torch.Generator().manual_seed(8)
    x_syn = torch.rand(7, T, O, generator=gen, dtype=DTYPE)
    x_real = torch.rand(9, T, O, generator=gen, dtype=DTYPE)
    lengths_syn = torch.tensor([4, 4, 3, 2, 1, 4, 2])

    def summaries(x, lengths):
        rows = []
        for n in range(x.shape[0]):
            for t in range(int(lengths[n])):
                cell = x[n, t].numpy()
                rows.append([cell[0], cell[2], cell[4] + 2 * cell[5]])
        return np.array(rows)

    r_syn = np.corrcoef(summaries(x_syn, lengths_syn), rowvar=False)
    r_real = np.corrcoef(summaries(x_real, torch.full((9,), T)), rowvar=False)
    expected = sum(abs(r_syn[i, j] - r_real[i, j]) for i in range(3) for j in range(i))
    got = alignment_loss(x_syn, x_real, mixed_schema, lengths_syn=lengths_syn)
    assert float(got) == pytest.approx(expected, rel=1e-10)


def test_alignment_gradient_matches_finite_differences(mixed_schema):
    gen = torch.Generator().manual_seed(3)
    x_syn = torch.rand(5, T, O, generator=gen, dtype=DTYPE, requires_grad=True)
    x_real = torch.rand(5, T, O, generator=gen, dtype=DTYPE)
    assert torch.autograd.gradcheck(lambda xs: alignment_loss(xs, x_real, mixed_schema), (x_syn,))


def test_alignment_rejects_empty_batches(mixed_schema):
    with pytest.raises(ValueError):
        alignment_loss(torch.zeros(0, T, O, dtype=DTYPE), torch.rand(2, T, O, dtype=DTYPE), mixed_schema)


def test_generator_gradient_matches_finite_difference(mixed_schema):
    gen_net, critic = init_params(mixed_schema, seed=5)
    latent = sample_latent(6, T, 3, seed=6)
    x_real = torch.rand(6, T, O, generator=torch.Generator().manual_seed(7), dtype=DTYPE)

    result = generator_loss(critic, gen_net, latent, x_real, mixed_schema, lambda_corr=10.0)
    assert set(result.terms) == {'adversarial', 'alignment'}
    assert result.loss == pytest.approx(result.terms['adversarial'] + 10.0 * result.terms['alignment'])

    bias = gen_net.dense3.bias
    h = 1e-6
    losses = []
    for step in (h, -h):
        with torch.no_grad():
            bias[0] += step
        losses.append(generator_loss(critic, gen_net, latent, x_real, mixed_schema, 10.0).loss)
        with torch.no_grad():
            bias[0] -= step
    numeric_grad = (losses[0] - losses[1]) / (2 * h)
    assert float(result.gradients['dense3.bias'][0]) == pytest.approx(numeric_grad, rel=1e-4, abs=1e-8)


def test_generator_loss_vanishes_for_zero_critic_without_alignment(mixed_schema):
    gen_net, _ = init_params(mixed_schema, seed=5)
    result = generator_loss(zero_critic, gen_net, sample_latent(3, T, 3, seed=1),
                            torch.rand(3, T, O, dtype=DTYPE), mixed_schema, lambda_corr=0.0)
    assert result.loss == 0.0


def test_critic_gradient_matches_finite_difference(mixed_schema):
    gen_net, critic = init_params(mixed_schema, seed=9)
    latent = sample_latent(4, T, 3, seed=10)
    x_real = torch.rand(4, T, O, generator=torch.Generator().manual_seed(11), dtype=DTYPE)
    epsilon = torch.tensor([0.1, 0.4, 0.6, 0.9], dtype=DTYPE)

    def evaluate():
        return critic_loss(critic, gen_net, x_real, latent, 10.0, epsilon=epsilon)

    result = evaluate()
    weight = critic.dense1.weight
    h = 1e-5
    losses = []
    for step in (h, -h):
        with torch.no_grad():
            weight[0, 0] += step
        losses.append(evaluate().loss)
        with torch.no_grad():
            weight[0, 0] -= step
    numeric_grad = (losses[0] - losses[1]) / (2 * h)
    assert float(result.gradients['dense1.weight'][0, 0]) == pytest.approx(numeric_grad, rel=1e-4, abs=1e-8)


@pytest.mark.parametrize("at", list(GradientPenaltyPoint))
def test_critic_result_exposes_input_gradient_norms(at):
    weight = 2.0 * torch.ones(T, O, dtype=DTYPE) / np.sqrt(T * O)
    x_real = torch.rand(5, T, O, dtype=DTYPE)
    result = critic_loss(linear_critic(weight), constant_generator(0.3), x_real, sample_latent(5, T, 3, seed=0),
                         lambda_gp=10.0, gp_at=at, rng=torch.Generator().manual_seed(1))
    assert result.input_gradient_norms.shape == (5,)
    assert torch.allclose(result.input_gradient_norms, torch.full((5,), 2.0, dtype=DTYPE))
    assert result.terms['gradient_norm_mean'] == pytest.approx(2.0)
    assert result.terms['gradient_penalty'] == pytest.approx(1.0)


def test_input_gradient_norms_of_zero_critic():
    x = torch.rand(3, T, O, dtype=DTYPE)
    norms = input_gradient_norms(zero_critic, x, x, epsilon=torch.full((3,), 0.5, dtype=DTYPE))
    assert torch.equal(norms, torch.zeros(3, dtype=DTYPE))


def _finite_difference_schema():
    return make_schema([numeric('hr'), binary('vent'), categorical('stage', ['a', 'b', 'c'])],
                       T=4, latent_dim=3, hidden_dim=8)


def _assert_directional_gradients(module, result, evaluate, seed):
    """Compare <grad, d> with a central difference along a random d, one parameter tensor at a time."""
    directions = torch.Generator().manual_seed(seed)
    h = 1e-6
    for name, param in module.named_parameters():
        direction = torch.randn(param.shape, generator=directions, dtype=DTYPE)
        original = param.detach().clone()
        losses = []
        for step in (h, -h):
            with torch.no_grad():
                param.copy_(original + step * direction)
            losses.append(evaluate().loss)
        with torch.no_grad():
            param.copy_(original)
        numeric_grad = (losses[0] - losses[1]) / (2 * h)
        analytic = float((result.gradients[name] * direction).sum())
        assert analytic == pytest.approx(numeric_grad, rel=1e-4, abs=1e-7), name


@pytest.mark.parametrize("seed", range(20))
def test_critic_gradients_match_finite_differences_for_every_parameter(seed):
    schema = _finite_difference_schema()
    gen_net, critic = init_params(schema, seed=seed)
    latent = sample_latent(4, T, 3, seed=100 + seed)
    x_real = torch.rand(4, T, O, generator=torch.Generator().manual_seed(200 + seed), dtype=DTYPE)
    epsilon = torch.rand(4, generator=torch.Generator().manual_seed(300 + seed), dtype=DTYPE)
    lengths = torch.tensor([4, 3, 2, 4])

    def evaluate():
        return critic_loss(critic, gen_net, x_real, latent, 10.0, lengths=lengths, epsilon=epsilon)

    result = evaluate()
    assert set(result.gradients) == {name for name, _ in critic.named_parameters()}
    _assert_directional_gradients(critic, result, evaluate, seed)


@pytest.mark.parametrize("seed", range(20))
def test_generator_gradients_match_finite_differences_for_every_parameter(seed):
    schema = _finite_difference_schema()
    gen_net, critic = init_params(schema, seed=seed)
    latent = sample_latent(4, T, 3, seed=100 + seed)
    x_real = torch.rand(4, T, O, generator=torch.Generator().manual_seed(200 + seed), dtype=DTYPE)

    def evaluate():
        return generator_loss(critic, gen_net, latent, x_real, schema, lambda_corr=10.0)

    result = evaluate()
    assert set(result.gradients) == {name for name, _ in gen_net.named_parameters()}
    _assert_directional_gradients(gen_net, result, evaluate, seed)
