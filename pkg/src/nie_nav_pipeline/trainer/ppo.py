"""
PPO update on a rollout buffer with the interaction-engine loss added with weight `alpha`.
"""
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from nie_nav_pipeline.nie import nie_loss
from nie_nav_pipeline.policy import InteractiveNavAgent
from nie_nav_pipeline.settings import TrainSettings
from nie_nav_pipeline.tensor_core import LrSchedule, Tensor, adam_step, clip_gradients, evaluate_graph, global_norm, ops
from nie_nav_pipeline.trainer.gae import compute_gae, normalize_advantages
from nie_nav_pipeline.trainer.rollout import RolloutBuffer

logger = logging.getLogger(__name__)


class DivergenceError(FloatingPointError):
    """Raised when a minibatch loss is not finite; the minibatch is dumped to `dump_path`."""

    def __init__(self, dump_path: Path, detail: str = ""):
        self.dump_path = dump_path
        super().__init__(f"Non-finite loss{f' ({detail})' if detail else ''}; minibatch written to {dump_path}")


@dataclass
class LossReport:
    policy: float
    value: float
    entropy: float
    nie: float
    total: float
    grad_norm: float
    clip_fraction: float

    @classmethod
    def mean(cls, reports: list["LossReport"]) -> "LossReport":
        return cls(**{f.name: float(np.mean([getattr(r, f.name) for r in reports])) for f in fields(cls)})

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass
class MinibatchLosses:
    policy: Tensor
    value: Tensor
    entropy: Tensor
    nie: Tensor | None
    total: Tensor
    clip_fraction: float


def clipped_surrogate(log_probs: Tensor, old_log_probs: np.ndarray, advantages: np.ndarray,
                      clip_epsilon: float) -> tuple[Tensor, float]:
    """
    Mean of min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A), the objective to be maximised, and the share of samples
    whose ratio lies outside the clip range.
    """
    ratio = ops.exp(ops.sub(log_probs, old_log_probs))
    unclipped = ops.mul(ratio, advantages)
    clipped = ops.mul(ops.clip(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon), advantages)
    clip_fraction = float(np.mean(np.abs(ratio.data - 1.0) > clip_epsilon))
    return ops.mean(ops.minimum(unclipped, clipped)), clip_fraction


def minibatch_losses(agent: InteractiveNavAgent, params, buffer: RolloutBuffer, columns: np.ndarray,
                     advantages: np.ndarray, returns: np.ndarray, cfg: TrainSettings) -> MinibatchLosses:
    sequence = agent.evaluate_sequence(params, buffer.inputs(columns), buffer.hidden[columns],
                                       buffer.starts[:, columns])
    actions = buffer.actions[:, columns]
    log_probs = ops.select(sequence.log_probs, actions, axis=2)
    surrogate, clip_fraction = clipped_surrogate(log_probs, buffer.log_probs[:, columns], advantages[:, columns],
                                                 cfg.clip_epsilon)
    policy_loss = ops.neg(surrogate)
    value_loss = ops.mean(ops.square(ops.sub(sequence.values, returns[:, columns])))
    probs = ops.exp(sequence.log_probs)
    entropy = ops.neg(ops.mean(ops.sum(ops.mul(probs, sequence.log_probs), axis=-1)))

    total = ops.add(ops.add(policy_loss, ops.mul(value_loss, cfg.value_coef)), ops.mul(entropy, -cfg.entropy_coef))
    engine = None
    if sequence.nie is not None:
        engine = nie_loss(sequence.nie, buffer.nie_target(columns))
        if cfg.alpha > 0:
            total = ops.add(total, ops.mul(engine, cfg.alpha))
    return MinibatchLosses(policy=policy_loss, value=value_loss, entropy=entropy, nie=engine, total=total,
                           clip_fraction=clip_fraction)


def dump_minibatch(dump_dir: Path, buffer: RolloutBuffer, columns: np.ndarray, update: int) -> Path:
    dump_dir.mkdir(parents=True, exist_ok=True)
    path = dump_dir / f"diverged_update_{update:06d}.npz"
    arrays = {f.name: getattr(buffer, f.name)[:, columns] for f in fields(buffer)
              if f.name not in ("hidden", "bootstrap", "results")}
    np.savez(path, hidden=buffer.hidden[columns], columns=columns, **arrays)
    return path


def ppo_update(buffer: RolloutBuffer, agent: InteractiveNavAgent, cfg: TrainSettings, schedule: LrSchedule,
               rng: np.random.Generator, dump_dir: Path = Path("diverged"), update: int = 0) -> LossReport:
    """
    `ppo_epochs` passes over the buffer, each split by worker column into `minibatches` recurrent minibatches.
    Every minibatch takes one clipped Adam step. Returns the minibatch mean of each loss component.
    """
    advantages, returns = compute_gae(buffer.rewards, buffer.values_with_bootstrap(), buffer.dones, cfg.gamma,
                                      cfg.gae_lambda)
    advantages = normalize_advantages(advantages).astype(agent.dtype)
    returns = returns.astype(agent.dtype)

    reports = []
    for _ in range(cfg.ppo_epochs):
        for columns in np.array_split(rng.permutation(buffer.workers), cfg.minibatches):
            recorded = {}

            def graph(_, params, columns=columns, recorded=recorded):
                recorded["losses"] = minibatch_losses(agent, params, buffer, columns, advantages, returns, cfg)
                return recorded["losses"].total

            result = evaluate_graph(graph, {}, agent.store)
            losses: MinibatchLosses = recorded["losses"]
            total = float(losses.total.data)
            if not np.isfinite(total):
                path = dump_minibatch(dump_dir, buffer, columns, update)
                logger.error(f"Loss became {total} in update {update}; minibatch dumped to {path}")
                raise DivergenceError(path, detail=f"total loss {total}")

            grads = result.backward().params
            norm = global_norm(grads)
            adam_step(agent.store, clip_gradients(grads, cfg.grad_clip), schedule)
            reports.append(LossReport(
                policy=float(losses.policy.data),
                value=float(losses.value.data),
                entropy=float(losses.entropy.data),
                nie=float(losses.nie.data) if losses.nie is not None else 0.0,
                total=total,
                grad_norm=norm,
                clip_fraction=losses.clip_fraction,
            ))

    report = LossReport.mean(reports)
    logger.debug(f"Update {update}: " + ", ".join(f"{k} {v:.4f}" for k, v in report.as_dict().items()))
    return report
