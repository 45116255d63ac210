"""Goal-conditioned 2-D reaching: a point mass moves toward a goal with
bounded steps. Used to test extrapolation of imitation policies to goals
outside the demonstration region.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .bilinear import BilinearPairModel

WORKSPACE_LO = -1.5
WORKSPACE_HI = 1.5
ACTION_MAX = 0.1
HORIZON = 25
START = np.array([0.0, -0.5])
TRAIN_GOAL_LO = np.array([0.0, 0.0])
TRAIN_GOAL_HI = np.array([1.0, 1.0])
OOS_GOAL_LO = np.array([-1.0, 0.0])
OOS_GOAL_HI = np.array([0.0, 1.0])


def env_step(pos: np.ndarray, action: np.ndarray) -> np.ndarray:
    """Apply one clipped action and clip the result to the workspace."""
    a = np.clip(np.asarray(action, dtype=float), -ACTION_MAX, ACTION_MAX)
    return np.clip(np.asarray(pos, dtype=float) + a, WORKSPACE_LO, WORKSPACE_HI)


def expert_action(pos: np.ndarray, goal: np.ndarray) -> np.ndarray:
    """Greedy expert: step straight at the goal, clipped to the action bound."""
    return np.clip(np.asarray(goal, dtype=float) - np.asarray(pos, dtype=float),
                   -ACTION_MAX, ACTION_MAX)


@dataclass
class Trajectory:
    goal: np.ndarray
    states: np.ndarray   # (T, 4): position then goal
    actions: np.ndarray  # (T, 2)

    @property
    def horizon(self) -> int:
        return self.states.shape[0]

    def final_distance(self) -> float:
        if self.states.shape[0] == 0:
            return float(np.linalg.norm(START - self.goal))
        # final position after the last action
        last = env_step(self.states[-1, :2], self.actions[-1])
        return float(np.linalg.norm(last - self.goal))


def rollout_expert(goal: np.ndarray, horizon: int = HORIZON) -> Trajectory:
    goal = np.asarray(goal, dtype=float)
    pos = START.copy()
    states = np.empty((horizon, 4))
    actions = np.empty((horizon, 2))
    for t in range(horizon):
        states[t] = np.concatenate([pos, goal])
        actions[t] = expert_action(pos, goal)
        pos = env_step(pos, actions[t])
    return Trajectory(goal=goal, states=states, actions=actions)


def sample_goals(n: int, lo: np.ndarray, hi: np.ndarray,
                 rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(lo, hi, size=(n, 2))


@dataclass
class TrajectoryDataset:
    trajectories: list

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def goals(self) -> np.ndarray:
        return np.array([tr.goal for tr in self.trajectories])

    def states_at(self, idx: np.ndarray, t: np.ndarray) -> np.ndarray:
        return np.array([self.trajectories[i].states[tt] for i, tt in zip(idx, t)])

    def actions_at(self, idx: np.ndarray, t: np.ndarray) -> np.ndarray:
        return np.array([self.trajectories[i].actions[tt] for i, tt in zip(idx, t)])


def collect_demos(n: int, seed: int = 0, lo: np.ndarray = TRAIN_GOAL_LO,
                  hi: np.ndarray = TRAIN_GOAL_HI,
                  horizon: int = HORIZON) -> TrajectoryDataset:
    rng = np.random.default_rng(seed)
    goals = sample_goals(n, lo, hi, rng)
    return TrajectoryDataset([rollout_expert(g, horizon) for g in goals])


def save_demos(path, demos: TrajectoryDataset) -> None:
    with open(path, "w") as fh:
        for tr in demos.trajectories:
            fh.write(json.dumps({"goal": tr.goal.tolist(),
                                 "states": tr.states.tolist(),
                                 "actions": tr.actions.tolist()}) + "\n")


def load_demos(path) -> TrajectoryDataset:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            out.append(Trajectory(goal=np.asarray(rec["goal"], dtype=float),
                                  states=np.asarray(rec["states"], dtype=float),
                                  actions=np.asarray(rec["actions"], dtype=float)))
    return TrajectoryDataset(out)


def make_pair_batch(demos: TrajectoryDataset, n_pairs: int,
                    rng: np.random.Generator):
    """Cross-trajectory, time-aligned training triples.

    Sample trajectories i != j and a shared timestep t; the model maps the
    state difference s_t^j - s_t^i with anchor s_t^i to the target action
    a_t^j.
    """
    n = len(demos)
    horizon = demos.trajectories[0].horizon
    i = rng.integers(0, n, size=n_pairs)
    j = rng.integers(0, n - 1, size=n_pairs)
    j = np.where(j >= i, j + 1, j)
    t = rng.integers(0, horizon, size=n_pairs)
    si = demos.states_at(i, t)
    sj = demos.states_at(j, t)
    aj = demos.actions_at(j, t)
    return sj - si, si, aj


def train_trajectory_transduction(demos: TrajectoryDataset, n_layers: int = 2,
                                  n_units: int = 128, segment_size: int = 32,
                                  fourier: bool = True, lr: float = 1e-4,
                                  batch_size: int = 32, n_steps: int = 2000,
                                  n_pairs: int = 20000,
                                  seed: int = 0) -> BilinearPairModel:
    rng = np.random.default_rng(seed)
    dx, anchor, target = make_pair_batch(demos, n_pairs, rng)
    model = BilinearPairModel.create(d_in=4, n_outputs=2,
                                     segment_size=segment_size,
                                     n_layers=n_layers, n_units=n_units,
                                     fourier=fourier, rng=rng)
    model.fit_pairs(dx, anchor, target, lr=lr, batch_size=batch_size,
                    n_steps=n_steps, seed=seed + 1)
    return model


def train_action_mse(model: BilinearPairModel, demos: TrajectoryDataset,
                     n_pairs: int = 5000, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    dx, anchor, target = make_pair_batch(demos, n_pairs, rng)
    return model.mse_on(dx, anchor, target)


def select_anchor_trajectory(goal: np.ndarray, demos: TrajectoryDataset,
                             rng: np.random.Generator) -> int:
    """Pick the demo whose goal is reachable from the test goal by a
    difference seen between training goals: nearest by goal-delta-bank
    distance, ties broken uniformly at random."""
    goals = demos.goals
    diffs = goals[:, None, :] - goals[None, :, :]   # train-goal delta bank
    bank = diffs.reshape(-1, goals.shape[1])
    # distance from (goal - g_i) to the bank, per candidate anchor i
    cand = goal[None, :] - goals
    d = np.min(np.linalg.norm(cand[:, None, :] - bank[None, :, :], axis=2), axis=1)
    best = np.flatnonzero(d <= d.min() + 1e-12)
    return int(best[rng.integers(0, best.size)]) if best.size > 1 else int(best[0])


def rollout_transductive(model: BilinearPairModel, demos: TrajectoryDataset,
                         goal: np.ndarray, seed: int = 0,
                         horizon: int = HORIZON) -> Trajectory:
    """Closed-loop rollout: one anchor demo is fixed for the episode and the
    policy at each step is the model output for the current state paired with
    the anchor's state at the same timestep."""
    rng = np.random.default_rng(seed)
    goal = np.asarray(goal, dtype=float)
    anchor = demos.trajectories[select_anchor_trajectory(goal, demos, rng)]
    pos = START.copy()
    states = np.empty((horizon, 4))
    actions = np.empty((horizon, 2))
    for t in range(horizon):
        states[t] = np.concatenate([pos, goal])
        s_anchor = anchor.states[min(t, anchor.horizon - 1)]
        actions[t] = np.clip(model.forward(states[t] - s_anchor, s_anchor),
                             -ACTION_MAX, ACTION_MAX)
        pos = env_step(pos, actions[t])
    return Trajectory(goal=goal, states=states, actions=actions)


def evaluate_policy(rollout_fn, goals: np.ndarray, seed: int = 0) -> np.ndarray:
    """Final goal distances of rollout_fn(goal, seed) over a batch of goals."""
    return np.array([rollout_fn(np.asarray(g, dtype=float), seed + k).final_distance()
                     for k, g in enumerate(goals)])
