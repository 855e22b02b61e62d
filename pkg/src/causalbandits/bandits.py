"""Bandit algorithms over causal environments.

``run_srm`` minimises simple regret: half the budget observes, the
interventional rewards are backed out of the observational samples, and the
second half re-estimates only the arms whose observational coverage is too
thin.  ``run_crm`` minimises cumulative regret on fully observable networks
by feeding backdoor-adjusted pseudo-counts from observational pulls into a
UCB index.  Uniform exploration, successive rejects and UCB1 are the
baselines.  Algorithms only see the environment's (projected) graph and
pull outcomes, never the ground-truth CPTs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .admg import Admg, NodeId, StructuralError, latent_projection, pa, pa_plus_and_pa_c
from .cbn import Arm, Cbn, arms_of, _sampling_plan
from .obs_estimation import estimate_all_rewards


class BanditEnv:
    """Pull-level access to a CBN; the algorithm side sees only the
    latent-projected graph and sampled records."""

    def __init__(self, cbn: Cbn):
        self._cbn = cbn
        self.visible_graph: Admg = latent_projection(cbn.graph)
        self.arms: tuple[Arm, ...] = arms_of(self.visible_graph)
        self._obs_nodes = cbn.observables
        self.has_hidden = bool(cbn.graph.hidden)
        plan, obs_pos = _sampling_plan(cbn)
        self._plan = plan
        self._obs_pos = obs_pos
        self._n_obs = len(obs_pos)

    def _to_original(self, arm: Arm) -> Arm:
        if arm.is_observational:
            return arm
        return Arm(self._obs_nodes[arm.target], arm.value)

    def pull_batch(self, arm: Arm, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """``n`` records under ``arm``; columns follow visible node ids."""
        target = None if arm.is_observational else self._obs_nodes[arm.target]
        cols: dict[NodeId, np.ndarray] = {}
        for v, eff, table in self._plan:
            if v == target:
                cols[v] = np.full(n, arm.value, dtype=np.uint8)
                continue
            if eff:
                idx = np.zeros(n, dtype=np.int64)
                for j, p in enumerate(eff):
                    idx |= cols[p].astype(np.int64) << j
                p1 = table[idx]
            else:
                p1 = table[0]
            cols[v] = (rng.random(n) < p1).astype(np.uint8)
        values = np.empty((n, self._n_obs), dtype=np.uint8)
        for v, i in self._obs_pos.items():
            values[:, i] = cols[v]
        return values, values[:, self._obs_pos[self._cbn.graph.reward]].copy()

    def pull(self, arm: Arm, rng: np.random.Generator) -> tuple[np.ndarray, int]:
        """One record under ``arm`` — fast scalar path for sequential loops."""
        target = None if arm.is_observational else self._obs_nodes[arm.target]
        vals: dict[NodeId, int] = {}
        for v, eff, table in self._plan:
            if v == target:
                vals[v] = arm.value
                continue
            idx = 0
            for j, p in enumerate(eff):
                idx |= vals[p] << j
            vals[v] = 1 if rng.random() < table[idx] else 0
        rec = np.empty(self._n_obs, dtype=np.uint8)
        for v, i in self._obs_pos.items():
            rec[i] = vals[v]
        return rec, int(rec[self._obs_pos[self._cbn.graph.reward]])


@dataclass
class RegretTrace:
    """Round-by-round pull log; regrets are filled in against an oracle."""

    arms_pulled: np.ndarray  # per-round index into env.arms
    chosen_arm: Optional[int] = None  # final recommendation, if the algorithm makes one

    def cumulative_regret(self, arm_means: Sequence[float]) -> np.ndarray:
        means = np.asarray(arm_means)
        inst = means.max() - means[self.arms_pulled]
        return np.cumsum(inst)

    def simple_regret(self, arm_means: Sequence[float]) -> float:
        if self.chosen_arm is None:
            raise ValueError("algorithm made no final recommendation")
        means = np.asarray(arm_means)
        return float(means.max() - means[self.chosen_arm])


@dataclass
class SrmOutput:
    chosen_arm: Arm
    estimates: dict[Arm, float]
    q_hat: dict[NodeId, float]
    m_hat: int
    q_set: tuple[Arm, ...]
    pulls_used: int
    trace: RegretTrace = field(repr=False, default=None)


def _argmax_arm(arms: Sequence[Arm], estimates: dict[Arm, float]) -> Arm:
    best = arms[0]
    for a in arms[1:]:
        if estimates[a] > estimates[best]:
            best = a
    return best


def _split_budget(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def run_srm(env: BanditEnv, T: int, rng: np.random.Generator) -> SrmOutput:
    """Simple-regret algorithm: observe for T/2 rounds, estimate every arm
    from the observational data, then spend the rest on the poorly-covered
    arm set Q and recommend the argmax."""
    if T < 2:
        raise ValueError("need T >= 2")
    g = env.visible_graph
    n_nodes = len(g.intervenable)
    n0 = T // 2
    samples, rewards = env.pull_batch(Arm(None, 0), n0, rng)
    estimates = estimate_all_rewards(g, samples, rewards)

    q_hat: dict[NodeId, float] = {}
    kk: dict[NodeId, int] = {}
    for i in sorted(g.intervenable):
        _, _, pa_c, k = pa_plus_and_pa_c(g, i)
        cols = [i] + sorted(pa_c)
        idx = np.zeros(len(samples), dtype=np.int64)
        for j, u in enumerate(cols):
            idx |= samples[:, u].astype(np.int64) << j
        counts = np.bincount(idx, minlength=1 << len(cols))
        q_hat[i] = (2.0 / T) * float(counts.min())
        kk[i] = k

    m_hat = 2 * n_nodes
    for tau in range(2, 2 * n_nodes + 1):
        if sum(1 for i in q_hat if q_hat[i] ** kk[i] < 1.0 / tau) <= tau:
            m_hat = tau
            break

    q_set = tuple(
        a for a in env.arms[1:] if q_hat[a.target] ** kk[a.target] < 1.0 / m_hat
    )
    rem = T - n0
    pulled = [0] * n0
    if q_set:
        shares = _split_budget(rem, len(q_set))
        for a, n_a in zip(q_set, shares):
            if n_a == 0:
                continue
            _, r = env.pull_batch(a, n_a, rng)
            estimates[a] = float(r.mean())
            pulled.extend([env.arms.index(a)] * n_a)
    else:
        # Nothing flagged for re-estimation: fall back to spreading the
        # remaining budget uniformly over all arms.
        shares = _split_budget(rem, len(env.arms))
        obs_sum, obs_n = float(rewards.sum()), n0
        for k_a, (a, n_a) in enumerate(zip(env.arms, shares)):
            if n_a == 0:
                continue
            _, r = env.pull_batch(a, n_a, rng)
            if a.is_observational:
                estimates[a] = (obs_sum + float(r.sum())) / (obs_n + n_a)
            else:
                estimates[a] = float(r.mean())
            pulled.extend([k_a] * n_a)
    chosen = _argmax_arm(env.arms, estimates)
    trace = RegretTrace(np.asarray(pulled, dtype=np.int32), env.arms.index(chosen))
    return SrmOutput(
        chosen_arm=chosen,
        estimates=estimates,
        q_hat=q_hat,
        m_hat=m_hat,
        q_set=q_set,
        pulls_used=len(pulled),
        trace=trace,
    )


# --- cumulative-regret algorithm ------------------------------------------


class _ArmEstimator:
    """Backdoor-boosted running estimate for one interventional arm.

    Keeps the observational rewards in per-parent-assignment cells (odd
    stream) and the parent-assignment frequencies (even stream), truncates
    every cell to the smallest cell size C, and spreads the even stream over
    C blocks to weight each truncated entry.  All quantities are maintained
    incrementally; a full O(C·Z) refresh happens only when C or the block
    length moves.
    """

    __slots__ = (
        "n_z", "cell_csum", "cell_n", "even_pref",
        "int_sum", "int_n", "c_use", "block_len", "obs_num", "last_even",
    )

    def __init__(self, n_z: int, horizon: int):
        self.n_z = n_z
        cap = horizon // 2 + 2
        # cell_csum[z, k] = sum of the first k rewards in cell z
        self.cell_csum = np.zeros((n_z, cap + 1), dtype=np.float64)
        self.cell_n = [0] * n_z
        # even_pref[k, z] = count of assignment z among the first k even
        # records; shared across the two arms of a node
        self.even_pref = np.zeros((cap + 1, n_z), dtype=np.int32)
        self.int_sum = 0.0
        self.int_n = 0
        self.c_use = 0
        self.block_len = 0
        self.obs_num = 0.0
        self.last_even = 0

    def add_interventional(self, y: int) -> None:
        self.int_sum += y
        self.int_n += 1

    def add_odd(self, z: int, y: int) -> None:
        k = self.cell_n[z]
        self.cell_csum[z, k + 1] = self.cell_csum[z, k] + y
        self.cell_n[z] = k + 1

    def _refresh(self, even_n: int) -> None:
        c = min(min(self.cell_n), even_n)
        if c == 0:
            self.c_use, self.block_len, self.obs_num = 0, 0, 0.0
            self.last_even = even_n
            return
        blk = even_n // c
        if c == self.c_use and blk == self.block_len:
            if even_n != self.last_even:
                self._update_last_block(even_n)
            return
        self.c_use, self.block_len = c, blk
        bounds = np.arange(c + 1, dtype=np.int64) * blk
        bounds[-1] = even_n
        counts = self.even_pref[bounds[1:]] - self.even_pref[bounds[:-1]]  # (c, n_z)
        lens = np.diff(bounds).astype(np.float64)[:, None]
        p_hat = counts / lens
        cell_y = (self.cell_csum[:, 1 : c + 1] - self.cell_csum[:, :c]).T  # (c, n_z)
        self.obs_num = float((cell_y * p_hat).sum())
        self.last_even = even_n

    def _update_last_block(self, even_n: int) -> None:
        # same C and block length: only the open last block has grown
        c, blk = self.c_use, self.block_len
        lo = (c - 1) * blk
        counts = self.even_pref[even_n] - self.even_pref[lo]
        p_hat = counts / float(even_n - lo)
        counts_old = self.even_pref[self.last_even] - self.even_pref[lo]
        p_old = counts_old / float(self.last_even - lo)
        cell_y = self.cell_csum[:, c] - self.cell_csum[:, c - 1]
        self.obs_num += float((cell_y * (p_hat - p_old)).sum())
        self.last_even = even_n

    def estimate(self, even_n: int) -> tuple[float, float]:
        """Return (mean estimate, effective count N + C)."""
        self._refresh(even_n)
        denom = self.int_n + self.c_use
        if denom == 0:
            return 0.0, 0.0
        return (self.int_sum + self.obs_num) / denom, float(denom)


class CrmState:
    """All running statistics of the cumulative-regret algorithm."""

    def __init__(self, g: Admg, horizon: int):
        self.g = g
        self.arms = arms_of(g)
        self.nodes = sorted(g.intervenable)
        self.pa_cols = {i: sorted(pa(g, i)) for i in self.nodes}
        self.beta = 1.0
        self.obs_sum = 0.0
        self.obs_n = 0
        self._odd_next = True
        cap = horizon // 2 + 2
        self.even_pref: dict[NodeId, np.ndarray] = {}
        self.even_n = 0
        self.est: dict[Arm, _ArmEstimator] = {}
        for i in self.nodes:
            n_z = 1 << len(self.pa_cols[i])
            self.even_pref[i] = np.zeros((cap + 1, n_z), dtype=np.int32)
            for x in (0, 1):
                e = _ArmEstimator(n_z, horizon)
                e.even_pref = self.even_pref[i]
                self.est[Arm(i, x)] = e

    def _z_of(self, i: NodeId, record: np.ndarray) -> int:
        z = 0
        for j, u in enumerate(self.pa_cols[i]):
            z |= int(record[u]) << j
        return z

    def add_record(self, arm: Arm, record: np.ndarray, reward: int) -> None:
        if arm.is_observational:
            self.obs_sum += reward
            self.obs_n += 1
            if self._odd_next:
                for i in self.nodes:
                    self.est[Arm(i, int(record[i]))].add_odd(self._z_of(i, record), reward)
            else:
                k = self.even_n
                for i in self.nodes:
                    pref = self.even_pref[i]
                    pref[k + 1] = pref[k]
                    pref[k + 1, self._z_of(i, record)] += 1
                self.even_n = k + 1
            self._odd_next = not self._odd_next
        else:
            self.est[arm].add_interventional(reward)

    def mu_hat(self, arm: Arm) -> float:
        if arm.is_observational:
            return self.obs_sum / self.obs_n if self.obs_n else 0.0
        return self.est[arm].estimate(self.even_n)[0]

    def ucb(self, arm: Arm, t: int) -> float:
        ln_t = math.log(t) if t > 1 else 0.0
        if arm.is_observational:
            return self.mu_hat(arm) + math.sqrt(2.0 * ln_t / self.obs_n)
        mean, count = self.est[arm].estimate(self.even_n)
        if count == 0:
            return math.inf
        return mean + math.sqrt(2.0 * ln_t / count)

    def update_beta(self, t: int) -> None:
        mu0 = self.mu_hat(Arm(None, 0))
        mu_star = max(self.mu_hat(a) for a in self.arms)
        if mu0 < mu_star:
            self.beta = min(2.0 * math.sqrt(2.0) / (mu_star - mu0), math.sqrt(math.log(t)))


def update_crm_estimates(state: CrmState, arm: Arm, record: np.ndarray, reward: int, t: int) -> CrmState:
    """Fold one round's record into the state (mutating and returning it)."""
    state.add_record(arm, record, reward)
    state.update_beta(t)
    return state


def run_crm(env: BanditEnv, T: int, rng: np.random.Generator) -> tuple[RegretTrace, CrmState]:
    """Cumulative-regret algorithm for fully observable environments."""
    g = env.visible_graph
    if env.has_hidden or g.bidirected:
        raise StructuralError("cumulative-regret algorithm needs a fully observable network")
    arms = env.arms
    if T <= len(arms):
        raise ValueError(f"need T > {len(arms)}")
    state = CrmState(g, T)
    pulled = np.empty(T, dtype=np.int32)
    for k, a in enumerate(arms):
        rec, y = env.pull(a, rng)
        state.add_record(a, rec, y)
        pulled[k] = k
    obs_arm = arms[0]
    for t in range(len(arms) + 1, T + 1):
        if state.obs_n < state.beta * state.beta * math.log(t):
            a, k_a = obs_arm, 0
        else:
            k_a = 0
            best = -math.inf
            for k, a2 in enumerate(arms):
                u = state.ucb(a2, t - 1)
                if u > best:
                    best, k_a = u, k
            a = arms[k_a]
        rec, y = env.pull(a, rng)
        update_crm_estimates(state, a, rec, y, t)
        pulled[t - 1] = k_a
    return RegretTrace(pulled), state


# --- baselines -------------------------------------------------------------


def run_uniform_exploration(env: BanditEnv, T: int, rng: np.random.Generator) -> RegretTrace:
    """Split the budget evenly over all arms, recommend the empirical best."""
    shares = _split_budget(T, len(env.arms))
    estimates: dict[Arm, float] = {}
    pulled: list[int] = []
    for k, (a, n_a) in enumerate(zip(env.arms, shares)):
        if n_a == 0:
            estimates[a] = -math.inf
            continue
        _, r = env.pull_batch(a, n_a, rng)
        estimates[a] = float(r.mean())
        pulled.extend([k] * n_a)
    chosen = _argmax_arm(env.arms, estimates)
    return RegretTrace(np.asarray(pulled, dtype=np.int32), env.arms.index(chosen))


def run_successive_rejects(env: BanditEnv, T: int, rng: np.random.Generator) -> RegretTrace:
    """Successive-rejects pure exploration over the arm set."""
    arms = list(env.arms)
    n_arms = len(arms)
    if T < n_arms:
        raise ValueError("budget below number of arms")
    log_bar = 0.5 + sum(1.0 / i for i in range(2, n_arms + 1))
    sums = {a: 0.0 for a in arms}
    counts = {a: 0 for a in arms}
    alive = list(arms)
    pulled: list[int] = []
    n_prev = 0
    for phase in range(1, n_arms):
        n_k = math.ceil((T - n_arms) / (log_bar * (n_arms + 1 - phase)))
        add = max(0, n_k - n_prev)
        n_prev = max(n_k, n_prev)
        for a in alive:
            n_use = min(add, T - len(pulled))
            if n_use:
                _, r = env.pull_batch(a, n_use, rng)
                sums[a] += float(r.sum())
                counts[a] += n_use
                pulled.extend([env.arms.index(a)] * n_use)
        # drop the empirical worst; ties drop the higher arm index
        worst = min(
            alive, key=lambda a: (sums[a] / counts[a] if counts[a] else 0.0, -env.arms.index(a))
        )
        alive.remove(worst)
    survivor = alive[0]
    while len(pulled) < T:
        _, r = env.pull_batch(survivor, 1, rng)
        sums[survivor] += float(r.sum())
        counts[survivor] += 1
        pulled.append(env.arms.index(survivor))
    return RegretTrace(np.asarray(pulled[:T], dtype=np.int32), env.arms.index(survivor))


def run_ucb1(env: BanditEnv, T: int, rng: np.random.Generator) -> RegretTrace:
    """Standard UCB1 over the interventional arms, with the same confidence
    radius convention as the cumulative-regret algorithm.

    A graph-blind bandit baseline has no purely-observational action, so the
    observational arm is excluded; on instances where observing is optimal
    this is what makes its cumulative regret keep growing.
    """
    arms = env.arms[1:]
    if T < len(arms):
        raise ValueError("budget below number of arms")
    sums = [0.0] * len(arms)
    counts = [0] * len(arms)
    pulled = np.empty(T, dtype=np.int32)
    for k, a in enumerate(arms):
        _, y = env.pull(a, rng)
        sums[k] += y
        counts[k] = 1
        pulled[k] = k + 1
    for t in range(len(arms) + 1, T + 1):
        ln_t = math.log(t - 1)
        best, k_a = -math.inf, 0
        for k in range(len(arms)):
            u = sums[k] / counts[k] + math.sqrt(2.0 * ln_t / counts[k])
            if u > best:
                best, k_a = u, k
        _, y = env.pull(arms[k_a], rng)
        sums[k_a] += y
        counts[k_a] += 1
        pulled[t - 1] = k_a + 1
    return RegretTrace(pulled)


# --- theorem bound curves --------------------------------------------------


def srm_bound(m: int, n: int, T: int) -> float:
    """Shape of the simple-regret guarantee (unit constant)."""
    return math.sqrt((m / T) * math.log(n * T / m))


def crm_bound(
    T: int,
    delta_0: float,
    deltas: Sequence[float],
    p_min: Sequence[float],
    n_z: Sequence[int],
) -> float:
    """Shape of the cumulative-regret guarantee.

    ``deltas``, ``p_min`` and ``n_z`` run over the interventional arms:
    gap, worst-case joint observation probability, and parent-domain size.
    A zero observational gap makes the leading terms vanish (the guarantee
    is then an instance constant); they are skipped.
    """
    total = 0.0
    if delta_0 > 0:
        total += 58.0 * math.log(T) / delta_0 + delta_0
        for d, p, z in zip(deltas, p_min, n_z):
            if d <= 0:
                continue
            eta = max(0.0, 1.0 - z * T ** (-(p * p) / 4.0))
            total += d * max(0.0, 1.0 + 8.0 * math.log(T) * (1.0 / (d * d) - p * eta / (36.0 * delta_0 * delta_0)))
    for d in deltas:
        if d > 0:
            total += d * math.pi * math.pi / 3.0
    if delta_0 > 0:
        total += delta_0 * math.pi * math.pi / 3.0
    return total


def theorem_bounds(kind: str, **params) -> float:
    """Evaluate the published regret-bound expressions (shape only)."""
    if kind == "srm":
        return srm_bound(params["m"], params["n"], params["T"])
    if kind == "crm":
        return crm_bound(
            params["T"], params["delta_0"], params["deltas"], params["p_min"], params["n_z"]
        )
    raise ValueError(f"unknown bound kind {kind!r}")
