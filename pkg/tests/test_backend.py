import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from ganlab.backend import OptimizerSpec, apply_update, compute_gradients, input_gradient, state_hash
from ganlab.errors import ContractError, NumericError


def _param(values):
    return torch.tensor(values, dtype=torch.float32, requires_grad=True)


def test_gradient_of_sum_is_ones():
    theta = _param([0.3, -1.0, 2.0])
    g = compute_gradients(theta.sum(), {"theta": theta})
    assert g["theta"].shape == (3,)
    assert torch.equal(g["theta"], torch.ones(3))


def test_gradient_of_half_squared_norm():
    theta = _param([1.0, -2.0])
    g = compute_gradients(0.5 * (theta**2).sum(), {"theta": theta})
    assert g["theta"].tolist() == [1.0, -2.0]


def test_unreachable_parameter_gets_zero_gradient():
    a, b = _param([1.0]), _param([5.0, 6.0])
    g = compute_gradients((a * 3).sum(), {"a": a, "b": b})
    assert torch.equal(g["b"], torch.zeros(2))
    assert g["a"].item() == 3.0


def test_compute_gradients_does_not_mutate():
    theta = _param([1.0, 2.0])
    before = theta.detach().clone()
    compute_gradients((theta**3).sum(), {"theta": theta})
    assert torch.equal(theta.detach(), before)
    assert theta.grad is None


def test_non_scalar_loss_rejected():
    theta = _param([1.0, 2.0])
    with pytest.raises(ContractError):
        compute_gradients(theta * 2, {"theta": theta})


@pytest.mark.parametrize("bad", [float("nan"), float("inf")])
def test_non_finite_loss_names_the_loss(bad):
    theta = _param([1.0])
    with pytest.raises(NumericError, match="wgangp"):
        compute_gradients(theta.sum() * bad, {"theta": theta}, name="wgangp")


# Random smooth scalar functions, written once for torch (float32) and once for
# numpy (float64).  The numpy copy is the finite-difference oracle.


def _random_function(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 17))
    A = rng.normal(size=(4, n))
    b = rng.normal(size=4)
    c = rng.normal(size=n)
    x0 = rng.normal(size=n)

    def f_np(x):
        h = A @ x + b
        return np.sum(np.sin(h)) + 0.5 * np.sum(np.tanh(h) ** 2) + np.dot(c, x) ** 2 / n + np.sum(np.log1p(x**2))

    At, bt, ct = (torch.tensor(v, dtype=torch.float32) for v in (A, b, c))

    def f_torch(x):
        h = At @ x + bt
        return torch.sin(h).sum() + 0.5 * (torch.tanh(h) ** 2).sum() + torch.dot(ct, x) ** 2 / n + torch.log1p(x**2).sum()

    return n, x0, f_np, f_torch


def _central_differences(f, x, h=1e-4):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_gradients_match_finite_differences(seed):
    n, x0, f_np, f_torch = _random_function(seed)
    theta = torch.tensor(x0, dtype=torch.float32, requires_grad=True)
    g = compute_gradients(f_torch(theta), {"theta": theta})["theta"].double().numpy()
    oracle = _central_differences(f_np, x0)
    err = np.linalg.norm(g - oracle) / max(np.linalg.norm(oracle), 1e-3)
    assert err < 1e-3


def test_input_gradient_linear_first_coordinate():
    x = torch.randn(5, 4)
    g = input_gradient(lambda p: 2 * p[:, 0], x)
    expected = torch.zeros(5, 4)
    expected[:, 0] = 2
    assert torch.equal(g, expected)


def test_input_gradient_constant_is_zero():
    x = torch.randn(3, 2)
    g = input_gradient(lambda p: torch.full((p.shape[0],), 7.0), x)
    assert torch.equal(g, torch.zeros(3, 2))


def test_input_gradient_half_squared_norm_hand_case():
    g = input_gradient(lambda p: 0.5 * (p**2).sum(1), torch.tensor([[3.0, 4.0]]))
    assert g.tolist() == [[3.0, 4.0]]


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 16), st.integers(1, 8), st.integers(0, 10_000))
def test_input_gradient_half_squared_norm_returns_point(n, d, seed):
    x = torch.randn(n, d, generator=torch.Generator().manual_seed(seed)) * 3
    g = input_gradient(lambda p: 0.5 * (p**2).sum(1), x)
    assert torch.allclose(g, x, atol=1e-6, rtol=0)


def test_input_gradient_leaves_parameters_untouched():
    lin = torch.nn.Linear(3, 1)
    input_gradient(lambda p: lin(p).squeeze(1), torch.randn(4, 3))
    assert all(p.grad is None for p in lin.parameters())


def test_input_gradient_rejects_non_finite_point():
    with pytest.raises(ContractError):
        input_gradient(lambda p: p.sum(1), torch.tensor([[float("nan"), 1.0]]))


def test_adam_first_step_hand_value():
    theta = torch.zeros(1)
    opt = OptimizerSpec("adam", 0.001, 0.9, 0.999, 1e-8)
    apply_update({"t": theta}, {"t": torch.ones(1)}, opt)
    assert opt.step == 1
    assert abs(theta.item() - (-0.000999999995)) < 1e-9


def test_sgd_hand_value():
    theta = torch.tensor([1.0])
    apply_update({"t": theta}, {"t": torch.tensor([2.0])}, OptimizerSpec("sgd", 0.1, 0.0))
    assert theta.item() == pytest.approx(0.8, abs=1e-7)


@pytest.mark.parametrize("algorithm", ["adam", "rmsprop", "sgd"])
def test_zero_gradient_leaves_parameter_unchanged(algorithm):
    theta = torch.tensor([0.5, -1.5])
    opt = OptimizerSpec(algorithm, 0.01, 0.9 if algorithm != "rmsprop" else 0.0, 0.99)
    apply_update({"t": theta}, {"t": torch.zeros(2)}, opt)
    assert theta.tolist() == [0.5, -1.5]
    assert opt.step == 1


@pytest.mark.parametrize(
    "algorithm, reference",
    [
        ("adam", lambda p: torch.optim.Adam(p, lr=1e-2, betas=(0.5, 0.999), eps=1e-8, foreach=False)),
        ("rmsprop", lambda p: torch.optim.RMSprop(p, lr=1e-2, alpha=0.99, eps=1e-8, foreach=False)),
        ("sgd", lambda p: torch.optim.SGD(p, lr=1e-2, momentum=0.5, foreach=False)),
    ],
)
def test_update_bit_identical_to_torch_optim(algorithm, reference):
    torch.manual_seed(0)
    ours = torch.randn(6, 3)
    theirs = torch.nn.Parameter(ours.clone())
    ref = reference([theirs])
    beta1 = 0.0 if algorithm == "rmsprop" else 0.5
    beta2 = 0.99 if algorithm == "rmsprop" else 0.999
    opt = OptimizerSpec(algorithm, 1e-2, beta1, beta2, 1e-8)
    for _ in range(30):
        g = torch.randn(6, 3)
        theirs.grad = g.clone()
        ref.step()
        apply_update({"w": ours}, {"w": g}, opt)
    assert torch.equal(ours, theirs.detach())


def test_update_is_deterministic():
    g = torch.randn(4)
    outs = []
    for _ in range(2):
        theta = torch.linspace(-1, 1, 4)
        opt = OptimizerSpec("adam", 1e-3)
        for _ in range(5):
            apply_update({"t": theta}, {"t": g}, opt)
        outs.append(theta)
    assert torch.equal(outs[0], outs[1])


def test_update_contract_errors():
    theta = torch.zeros(2)
    with pytest.raises(ContractError):
        apply_update({"t": theta}, {"t": torch.zeros(3)}, OptimizerSpec())
    with pytest.raises(ContractError):
        apply_update({"t": theta}, {"other": torch.zeros(2)}, OptimizerSpec())
    with pytest.raises(NumericError):
        apply_update({"t": theta}, {"t": torch.tensor([0.0, float("nan")])}, OptimizerSpec())


def test_optimizer_state_round_trip():
    theta = torch.randn(3)
    opt = OptimizerSpec("adam", 1e-3)
    apply_update({"t": theta}, {"t": torch.ones(3)}, opt)
    clone = OptimizerSpec.from_state_dict(opt.state_dict())
    assert clone.step == 1 and clone.hyperparams() == opt.hyperparams()
    assert torch.equal(clone.state["t"]["exp_avg"], opt.state["t"]["exp_avg"])


def test_state_hash_tracks_parameters():
    lin = torch.nn.Linear(2, 2)
    h = state_hash(lin)
    assert h == state_hash(lin)
    with torch.no_grad():
        lin.weight[0, 0] += 1e-3
    assert h != state_hash(lin)
