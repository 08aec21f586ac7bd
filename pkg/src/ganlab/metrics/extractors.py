"""Feature extractors / classifiers plugged into the metrics."""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from ..data import BatchPlan, Dataset, batches


def identity_features(x: Tensor) -> Tensor:
    return x.flatten(1)


class UniformClassifier:
    """Predicts the uniform distribution for every sample (classifier score 1)."""

    def __init__(self, num_classes: int = 10):
        self.num_classes = num_classes

    def __call__(self, x: Tensor) -> Tensor:
        return torch.full((x.shape[0], self.num_classes), 1.0 / self.num_classes, device=x.device)


class SmallConvClassifier(nn.Module):
    """Two conv layers + linear head; a desk-scale stand-in for a pretrained classifier."""

    def __init__(self, channels: int = 1, image_size: int = 28, num_classes: int = 10, width: int = 16):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(channels, width, 3, 2, 1), nn.ReLU(),
            nn.Conv2d(width, 2 * width, 3, 2, 1), nn.ReLU(),
            nn.Flatten(),
        )
        side = (image_size + 1) // 2
        side = (side + 1) // 2
        self.head = nn.Linear(2 * width * side * side, num_classes)

    def forward(self, x: Tensor) -> Tensor:
        return self.head(self.body(x))

    @torch.no_grad()
    def probabilities(self, x: Tensor) -> Tensor:
        self.eval()
        return F.softmax(self(x), dim=1)

    def features(self, x: Tensor) -> Tensor:
        with torch.no_grad():
            self.eval()
            return self.body(x)


def fit_classifier(model: nn.Module, dataset: Dataset, epochs: int = 2, lr: float = 1e-3, seed: int = 0) -> nn.Module:
    """Plain supervised training; returns ``model`` in eval mode."""
    torch.manual_seed(seed)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    plan = BatchPlan(64, seed, drop_last=False)
    model.train()
    for epoch in range(epochs):
        for x, y in batches(dataset, plan, epoch):
            opt.zero_grad()
            F.cross_entropy(model(x), y).backward()
            opt.step()
    return model.eval()
