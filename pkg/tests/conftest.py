import numpy as np
import pytest

from backend.litehetnet.netconfig import InParams, NetworkConfig, load_config


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="运行验收级慢测试")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="需要 --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session")
def fig2_bundle():
    return load_config()


@pytest.fixture(scope="session")
def fig2_network(fig2_bundle):
    return fig2_bundle.network


@pytest.fixture(scope="session")
def fig2_params(fig2_bundle):
    """U=9, T1=T2=10"""
    return fig2_bundle.in_params


@pytest.fixture(scope="session")
def non_in_params():
    return InParams()


@pytest.fixture(scope="session")
def equal_network():
    """两层功率与路径损耗指数相同（α=4），覆盖概率有闭式解"""
    return NetworkConfig(
        lambda1=1e-4, lambda2=2e-4, p1=1.0, p2=1.0, alpha1=4.0, alpha2=4.0, n1=2, n2=1
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20170603)
