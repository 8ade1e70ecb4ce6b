import numpy as np


def compute_gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray, gamma: float,
                lam: float) -> tuple[np.ndarray, np.ndarray]:
    """
    Generalized advantage estimation along the leading (time) axis.

    `values` holds one more entry than `rewards`: the last one is the bootstrap value of the state after the final
    step. A done flag at step t cuts both the bootstrap and the advantage trace at t.

    Returns (advantages, returns) shaped like `rewards`, with returns = advantages + values[:-1].
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    if dones.shape != rewards.shape:
        raise ValueError(f"Done flags {dones.shape} do not match rewards {rewards.shape}")
    if values.shape != (rewards.shape[0] + 1, *rewards.shape[1:]):
        raise ValueError(f"Values {values.shape} must hold one bootstrap entry more than rewards {rewards.shape}")
    assert 0 < gamma <= 1 and 0 <= lam <= 1, "gamma must lie in (0, 1] and lambda in [0, 1]"

    advantages = np.zeros_like(rewards)
    running = np.zeros_like(rewards[0]) if rewards.size else np.zeros(())
    for t in reversed(range(rewards.shape[0])):
        keep = 1.0 - dones[t]
        delta = rewards[t] + gamma * values[t + 1] * keep - values[t]
        running = delta + gamma * lam * keep * running
        advantages[t] = running
    return advantages, advantages + values[:-1]


def normalize_advantages(advantages: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Zero mean, unit standard deviation over the whole update."""
    centered = advantages - advantages.mean()
    return centered / (centered.std() + eps)
