import numpy as np
import pytest
import torch

from egosocial.config import ExperimentConfig
from egosocial.kinematics import default_body
from egosocial.synth import generate_interaction_episode


@pytest.fixture(scope="session")
def body():
    return default_body()


@pytest.fixture(scope="session")
def tiny_config():
    """Small-but-real config for fast training tests."""
    return ExperimentConfig(
        latent_dim=16, layers=1, heads=2, frames=12,
        vae_steps=30, denoiser_steps=30, batch_vae=4, batch_denoiser=4,
        lr_vae=1e-3, lr_denoiser=1e-3,
        timesteps=50, steps_inference=5,
        episodes=6, train_episodes=4, scene_points=64,
        scenario="mixed", coupling=0.9, seed=0,
    )


@pytest.fixture(scope="session")
def episode():
    return generate_interaction_episode("mixed", 12, 0.9, seed=7, scene_points=64)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(0)


def random_rotation(rng):
    """Uniform-ish random rotation via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 2] *= -1
    return q


@pytest.fixture(autouse=True)
def _torch_single_thread():
    torch.set_num_threads(2)
    yield
