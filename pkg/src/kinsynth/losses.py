"""Training losses for the inheritance and attribute modules.

Distances reduce per sample and average over the batch; image and feature
distances are normalized by element count so the default weights keep their
meaning across canvas sizes. Critic maps reduce to a scalar by mean before
the Wasserstein terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

EPS_LOG = 1e-7


class LossError(ValueError):
    pass


@dataclass(frozen=True)
class LossWeights:
    """Objective weights; defaults follow the published training setup."""

    total_attribute: float = 1.0  # lambda_0
    inheritance_pixel: float = 10.0  # lambda_11
    inheritance_adversarial: float = 0.1  # lambda_12
    inheritance_perceptual: float = 0.1  # lambda_13
    attribute_adversarial: float = 0.001  # lambda_21
    attribute_perceptual: float = 0.1  # lambda_22
    gradient_penalty: float = 10.0  # lambda_gp

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value < 0:
                raise LossError(f"{name} must be nonnegative, got {value}")


def _check_same_shape(a: torch.Tensor, b: torch.Tensor):
    if a.shape != b.shape:
        raise LossError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")


def pixel_loss(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Per-image root-mean-square pixel distance, averaged over the batch."""
    _check_same_shape(a, b)
    diff = (a - b).flatten(1)
    return torch.sqrt((diff**2).mean(dim=1)).mean()


def critic_scalar(critic, x: torch.Tensor) -> torch.Tensor:
    """Reduce the critic's score map to one scalar per sample by mean."""
    out = critic(x)
    return out.flatten(1).mean(dim=1) if out.ndim > 1 else out


def gradient_penalty(
    critic,
    real: torch.Tensor,
    fake: torch.Tensor,
    weight: float = 10.0,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """WGAN-GP penalty on random interpolates between real and fake batches."""
    _check_same_shape(real, fake)
    batch = real.shape[0]
    u_shape = (batch,) + (1,) * (real.ndim - 1)
    u = torch.rand(u_shape, dtype=real.dtype, generator=generator)
    interp = (u * real + (1.0 - u) * fake.detach()).requires_grad_(True)
    scores = critic_scalar(critic, interp)
    grads = torch.autograd.grad(
        scores.sum(), interp, create_graph=True, retain_graph=True
    )[0]
    norms = grads.flatten(1).norm(2, dim=1)
    return weight * ((norms - 1.0) ** 2).mean()


def wgan_losses(
    critic,
    real: torch.Tensor,
    fake: torch.Tensor,
    gp_weight: float = 10.0,
    generator: torch.Generator | None = None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """(critic_loss, generator_adversarial_loss) for the inheritance module."""
    _check_same_shape(real, fake)
    d_fake = critic_scalar(critic, fake.detach()).mean()
    d_real = critic_scalar(critic, real).mean()
    gp = gradient_penalty(critic, real, fake, gp_weight, generator)
    critic_loss = d_fake - d_real + gp
    gen_adv = -critic_scalar(critic, fake).mean()
    return critic_loss, gen_adv


def age_loss(pred: torch.Tensor, target_onehot: torch.Tensor) -> torch.Tensor:
    """Mean squared L2 distance between age posteriors and one-hot targets."""
    _check_same_shape(pred, target_onehot)
    return ((pred - target_onehot) ** 2).sum(dim=1).mean()


def gender_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean squared distance between gender scores and scalar targets."""
    _check_same_shape(pred, target)
    return ((pred - target) ** 2).mean()


def perceptual_loss(a: torch.Tensor, b: torch.Tensor, extractor) -> torch.Tensor:
    """Sum over the two tap layers of mean squared feature distance."""
    _check_same_shape(a, b)
    taps_a = extractor(a)
    taps_b = extractor(b)
    total = 0.0
    for name in ("tap22", "tap54"):
        fa, fb = taps_a[name], taps_b[name]
        total = total + ((fa - fb) ** 2).flatten(1).mean(dim=1).mean()
    return total


def attribute_adversarial_losses(
    disc, real: torch.Tensor, fake: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """Non-saturating GAN losses for the attribute discriminator/generator."""
    _check_same_shape(real, fake)
    d_real = disc(real).clamp(EPS_LOG, 1.0 - EPS_LOG)
    d_fake = disc(fake.detach()).clamp(EPS_LOG, 1.0 - EPS_LOG)
    disc_loss = -torch.log(d_real).mean() - torch.log(1.0 - d_fake).mean()
    gen_adv = -torch.log(disc(fake).clamp(EPS_LOG, 1.0 - EPS_LOG)).mean()
    return disc_loss, gen_adv


def total_inheritance_loss(
    age: torch.Tensor | float,
    gender: torch.Tensor | float,
    pixel: torch.Tensor | float,
    adversarial: torch.Tensor | float,
    perceptual: torch.Tensor | float,
    weights: LossWeights,
):
    return (
        age
        + gender
        + weights.inheritance_pixel * pixel
        + weights.inheritance_adversarial * adversarial
        + weights.inheritance_perceptual * perceptual
    )


def total_attribute_loss(
    pixel: torch.Tensor | float,
    adversarial: torch.Tensor | float,
    perceptual: torch.Tensor | float,
    weights: LossWeights,
):
    return (
        pixel
        + weights.attribute_adversarial * adversarial
        + weights.attribute_perceptual * perceptual
    )


def total_loss(inheritance, attribute, weights: LossWeights):
    return inheritance + weights.total_attribute * attribute
