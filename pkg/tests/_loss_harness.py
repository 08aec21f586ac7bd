"""Float64 two-layer MLP setups for checking loss gradients against finite differences."""

import numpy as np
import torch

from ganlab.backend import parameter_set
from ganlab.losses import LOSSES, LossContext
from ganlab.models import MLPAutoencoderDiscriminator, MLPDiscriminator, MLPGenerator

NUM_CLASSES = 3
AUTOENCODER_LOSSES = {"began_discriminator", "began_generator", "ebgan_discriminator", "ebgan_generator"}


def make_setup(loss_id, seed=0, batch=6):
    torch.manual_seed(seed)
    g = MLPGenerator(latent_dim=3, out_dim=2, hidden=8, num_classes=NUM_CLASSES, activation="tanh").double()
    if loss_id in AUTOENCODER_LOSSES:
        d = MLPAutoencoderDiscriminator(in_dim=2, hidden=8, code_dim=3).double()
    else:
        d = MLPDiscriminator(in_dim=2, hidden=8, aux_classes=NUM_CLASSES, activation="tanh").double()
    gen = torch.Generator().manual_seed(seed + 1)
    x = torch.randn(batch, 2, generator=gen, dtype=torch.float64)
    z = torch.randn(batch, 3, generator=gen, dtype=torch.float64)
    labels = torch.randint(0, NUM_CLASSES, (batch,), generator=gen)
    kwargs = {}
    if loss_id == "historical_averaging":
        kwargs["targets"] = ["discriminator"]
    if loss_id == "began_discriminator":
        kwargs["k"] = 0.4  # so the fake-energy term contributes to the gradient
    loss = LOSSES[loss_id](**kwargs)
    role = loss.role or "discriminator"
    return loss, g, d, x, z, labels, role


def evaluate(loss, g, d, x, z, labels, role, penalty_seed=123):
    fake = g(z, labels)
    if role == "discriminator":
        fake = fake.detach()
    real_out, fake_out = d.evaluate(x), d.evaluate(fake)
    model = d if role == "discriminator" else g
    ctx = LossContext(
        d_real=real_out.score,
        d_fake=fake_out.score,
        real_batch=x,
        fake_batch=fake,
        features_real=real_out.features,
        features_fake=fake_out.features,
        aux_logits_real=real_out.aux_logits,
        aux_logits_fake=fake_out.aux_logits,
        labels=labels,
        discriminator_fn=d,
        rng=torch.Generator().manual_seed(penalty_seed),
        params=parameter_set(model),
        model_name=role,
    )
    return loss(ctx)


def gradient_check(loss_id, seed=0, h=1e-6):
    """Relative error between autograd and central differences on the target's parameters."""
    loss, g, d, x, z, labels, role = make_setup(loss_id, seed)
    model = d if role == "discriminator" else g
    if loss_id == "historical_averaging":
        # seed the history with a perturbed copy so the penalty is not identically zero
        with torch.no_grad():
            saved = [p.clone() for p in model.parameters()]
            for p in model.parameters():
                p.add_(0.3 * torch.randn_like(p))
        evaluate(loss, g, d, x, z, labels, role)
        with torch.no_grad():
            for p, s in zip(model.parameters(), saved):
                p.copy_(s)
    snapshot = loss.state_dict()

    def value():
        loss.load_state_dict(snapshot)
        return evaluate(loss, g, d, x, z, labels, role)

    params = list(model.parameters())
    out = value()
    grads = torch.autograd.grad(out, params, allow_unused=True)
    out = out.detach()
    auto = np.concatenate(
        [(gr if gr is not None else torch.zeros_like(p)).detach().flatten().numpy() for gr, p in zip(grads, params)]
    )

    def nudge(flat, i, v):
        with torch.no_grad():
            flat[i] = v

    fd = []
    for p in params:
        flat = p.data.view(-1)
        for i in range(flat.numel()):
            orig = flat[i].item()
            nudge(flat, i, orig + h)
            up = value().item()
            nudge(flat, i, orig - h)
            down = value().item()
            nudge(flat, i, orig)
            fd.append((up - down) / (2 * h))
    fd = np.array(fd)
    assert np.isfinite(auto).all()
    return np.linalg.norm(auto - fd) / max(np.linalg.norm(fd), 1e-8), out.item()
