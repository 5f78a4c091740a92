import numpy as np
import pytest

from xhmc import GaussianModel, HamiltonianSystem, TargetModel, generate_irt_data


class FlatModel(TargetModel):
    """Constant potential (free particle); exercises the extension interface."""

    def __init__(self, dimension=1):
        self.dimension = dimension
        self.name = f"flat_{dimension}"

    def potential(self, q):
        self._check_point(q)
        return 0.0

    def gradient(self, q):
        q = self._check_point(q)
        return np.zeros_like(q)


class CountingModel(TargetModel):
    """Wraps a model and counts potential/gradient evaluations."""

    def __init__(self, inner):
        self.inner = inner
        self.dimension = inner.dimension
        self.name = f"counted_{inner.name}"
        self.gradient_calls = 0
        self.potential_calls = 0

    def potential(self, q):
        self.potential_calls += 1
        return self.inner.potential(q)

    def gradient(self, q):
        self.gradient_calls += 1
        return self.inner.gradient(q)


def small_models():
    """One small instance per shipped model family."""
    return [
        GaussianModel.iid(3),
        GaussianModel.two_dim_corr(0.99),
        GaussianModel.two_dim_corr(0.7),
        GaussianModel.banded(5, 0.95),
        generate_irt_data(n_students=6, seed=11),
    ]


@pytest.fixture(params=range(5), ids=lambda i: small_models()[i].name)
def shipped_model(request):
    return small_models()[request.param]


@pytest.fixture
def std1d():
    return HamiltonianSystem(GaussianModel.iid(1))


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
