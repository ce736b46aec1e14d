import pytest

from twofluid import config, dynamics, twin


@pytest.fixture(scope="session")
def std1d_cfg():
    return config.default_config()


@pytest.fixture(scope="session")
def std1d_params(std1d_cfg):
    return std1d_cfg.sim_params()


@pytest.fixture(scope="session")
def std1d_initial(std1d_cfg):
    return config.build_initial_state(std1d_cfg)


@pytest.fixture(scope="session")
def traj128(std1d_initial, std1d_params):
    return dynamics.run(std1d_initial, std1d_params)


@pytest.fixture(scope="session")
def sweep128(std1d_initial, std1d_params):
    """Velocity-mode perturbation sweep on std1d, shared reference run."""
    return twin.stability_sweep(
        std1d_initial, std1d_params, deltas=(1e-2, 1e-3, 1e-4), target="velocity"
    )


@pytest.fixture(scope="session")
def twin128(sweep128):
    """The delta = 1e-3 member of the std1d sweep."""
    return sweep128.results[1]


def cfg_at(n: int, **overrides) -> config.RunConfig:
    """std1d at a different resolution, with optional raw-key overrides."""
    lines = [f"[grid]", f"n = {n}", ""]
    for dotted, value in overrides.items():
        section, key = dotted.split("__")
        lines += [f"[{section}]", f"{key} = {value}", ""]
    return config.parse_config("\n".join(lines))
