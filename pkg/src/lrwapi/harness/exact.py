"""Exact dynamic programming on enumerable MDPs.

Used as the reference for rollout estimates, the finite-horizon error
bound and the policy-improvement checks.
"""

from __future__ import annotations

import itertools
import math
import random
from collections import deque
from dataclasses import dataclass

import numpy as np

from ..mdp import ResourceError, is_goal_state

DEFAULT_STATE_CAP = 200_000
TIE_TOLERANCE = 1e-10


class TabularMDP:
    """An MDP with integer states and actions.

    Args:
        P: transition probabilities, shape ``(A, S, S)``.
        R: rewards, shape ``(S, A)``.
        initial: initial-state distribution, shape ``(S,)``.
        terminal: boolean mask of absorbing zero-reward states.
        legal: boolean ``(S, A)`` mask (all legal by default).
        discount: the discount factor.
    """

    def __init__(self, P, R, initial=None, terminal=None, legal=None, discount=0.9,
                 labels=None, action_labels=None):
        self.P = np.asarray(P, dtype=float)
        self.R = np.asarray(R, dtype=float)
        A, S, S2 = self.P.shape
        if S != S2 or self.R.shape != (S, A):
            raise ValueError("P must be (A, S, S) and R must be (S, A)")
        if not np.allclose(self.P.sum(axis=2), 1.0, atol=1e-9):
            raise ValueError("transition rows must sum to 1")
        self.initial = (np.full(S, 1.0 / S) if initial is None
                        else np.asarray(initial, dtype=float))
        self.terminal = (np.zeros(S, bool) if terminal is None
                         else np.asarray(terminal, dtype=bool))
        self.legal = (np.ones((S, A), bool) if legal is None
                      else np.asarray(legal, dtype=bool))
        self.discount = float(discount)
        self.labels = labels
        self.action_labels = action_labels
        self._cum = np.cumsum(self.P, axis=2)
        self._cum[..., -1] = 1.0
        self._init_cum = np.cumsum(self.initial)
        self._init_cum[-1] = 1.0

    @property
    def n_states(self) -> int:
        return self.P.shape[1]

    @property
    def n_actions(self) -> int:
        return self.P.shape[0]

    @property
    def deterministic(self) -> bool:
        return bool(np.all((self.P == 0) | (self.P == 1)))

    # simulator protocol
    def legal_actions(self, s):
        return [int(a) for a in np.flatnonzero(self.legal[s])]

    def is_terminal(self, s) -> bool:
        return bool(self.terminal[s])

    def step(self, s, a, rng: random.Random):
        if self.terminal[s]:
            return s, 0.0
        if not self.legal[s, a]:
            return s, float(self.R[s, a])
        row = self._cum[a, s]
        nxt = int(np.searchsorted(row, rng.random(), side="right"))
        return min(nxt, self.n_states - 1), float(self.R[s, a])

    def sample_initial(self, rng: random.Random) -> int:
        return min(int(np.searchsorted(self._init_cum, rng.random(), side="right")),
                   self.n_states - 1)

    def effective(self):
        """Transition/reward arrays with terminal states made absorbing and
        illegal actions turned into self-loops."""
        P = self.P.copy()
        R = self.R.copy()
        S = self.n_states
        for s in range(S):
            for a in range(self.n_actions):
                if self.terminal[s] or not self.legal[s, a]:
                    P[a, s] = 0.0
                    P[a, s, s] = 1.0
                if self.terminal[s]:
                    R[s, a] = 0.0
        return P, R


@dataclass
class ExactSolution:
    """Value tables of one policy on a tabular MDP.

    ``V``/``Q`` are infinite-horizon values (None when ``gamma == 1``),
    ``V_h``/``Q_h`` the ``h``-horizon values, ``improved`` the greedy policy
    with respect to ``Q`` (least action among ties) and ``delta_star`` the
    Q-advantage (None if every state has a single Q value).
    """

    policy: np.ndarray
    gamma: float
    V: np.ndarray | None
    Q: np.ndarray | None
    horizon: int | None
    V_h: np.ndarray | None
    Q_h: np.ndarray | None
    improved: np.ndarray | None
    delta_star: float | None
    r_max: float
    v_max: float


def _policy_matrices(P, R, policy):
    S = P.shape[1]
    idx = np.arange(S)
    return P[policy, idx], R[idx, policy]


def evaluate_policy_exact(M: TabularMDP, policy, gamma=None, tol=1e-12, max_iter=1_000_000):
    """``V^pi`` by iterative evaluation (requires ``gamma < 1``)."""
    gamma = M.discount if gamma is None else gamma
    if gamma >= 1.0:
        raise ValueError("infinite-horizon evaluation needs gamma < 1")
    P, R = M.effective()
    Ppi, Rpi = _policy_matrices(P, R, np.asarray(policy))
    V = np.zeros(M.n_states)
    for _ in range(max_iter):
        V2 = Rpi + gamma * Ppi @ V
        if np.max(np.abs(V2 - V)) <= tol:
            return V2
        V = V2
    return V


def q_values(M: TabularMDP, V, gamma=None):
    """``Q(s, a) = R(s, a) + gamma * E[V(s')]``; nan for illegal actions."""
    gamma = M.discount if gamma is None else gamma
    P, R = M.effective()
    Q = R + gamma * np.einsum("ast,t->sa", P, V)
    Q[~M.legal] = np.nan
    Q[M.terminal] = 0.0
    return Q


def finite_horizon(M: TabularMDP, policy, h: int, gamma=None):
    """``(V_h, Q_h)`` by the recursion ``V_0 = 0``, ``V_k = R + gamma P V_{k-1}``."""
    gamma = M.discount if gamma is None else gamma
    P, R = M.effective()
    Ppi, Rpi = _policy_matrices(P, R, np.asarray(policy))
    V = np.zeros(M.n_states)
    prev = V
    for _ in range(h):
        prev = V
        V = Rpi + gamma * Ppi @ V
    if h == 0:
        Q = np.zeros((M.n_states, M.n_actions))
    else:
        Q = R + gamma * np.einsum("ast,t->sa", P, prev)
    Q[~M.legal] = np.nan
    Q[M.terminal] = 0.0
    return V, Q


def greedy(M: TabularMDP, Q, tol=TIE_TOLERANCE):
    """Least legal action attaining the max of each row of ``Q``."""
    out = np.zeros(M.n_states, dtype=int)
    for s in range(M.n_states):
        legal = np.flatnonzero(M.legal[s])
        if legal.size == 0:
            continue
        q = Q[s, legal]
        best = np.max(q)
        out[s] = legal[np.flatnonzero(q >= best - tol)[0]]
    return out


def best_actions(M: TabularMDP, Q, s, tol=TIE_TOLERANCE) -> tuple:
    legal = np.flatnonzero(M.legal[s])
    q = Q[s, legal]
    return tuple(int(a) for a in legal[q >= np.max(q) - tol])


def q_advantage_star(M: TabularMDP, Q, tol=TIE_TOLERANCE):
    """Minimum best-minus-second-best gap over states with distinct Q values."""
    gaps = []
    for s in range(M.n_states):
        if M.terminal[s]:
            continue
        q = np.sort(Q[s, M.legal[s]])[::-1]
        if q.size < 2 or q[0] - q[-1] <= tol:
            continue
        second = q[q < q[0] - tol][0]
        gaps.append(q[0] - second)
    return min(gaps) if gaps else None


def r_max(M: TabularMDP) -> float:
    P, R = M.effective()
    live = M.legal & ~M.terminal[:, None]
    return float(np.max(np.abs(R[live]))) if live.any() else 0.0


def exact_solve(M: TabularMDP, policy=None, gamma=None, horizon=None,
                max_states=DEFAULT_STATE_CAP) -> ExactSolution:
    """Tabulate values of ``policy`` (the optimal policy if omitted).

    Raises:
        ResourceError: if the MDP has more than ``max_states`` states.
    """
    if M.n_states > max_states:
        raise ResourceError(f"{M.n_states} states exceed the cap of {max_states}")
    gamma = M.discount if gamma is None else gamma
    if policy is None:
        policy = value_iteration(M, gamma)[1]
    policy = np.asarray(policy, dtype=int)
    rm = r_max(M)
    V = Q = improved = dstar = None
    if gamma < 1.0:
        V = evaluate_policy_exact(M, policy, gamma)
        Q = q_values(M, V, gamma)
        improved = greedy(M, Q)
        dstar = q_advantage_star(M, Q)
        vm = rm / (1.0 - gamma)
    else:
        vm = math.inf
    V_h = Q_h = None
    if horizon is not None:
        V_h, Q_h = finite_horizon(M, policy, horizon, gamma)
    return ExactSolution(policy, gamma, V, Q, horizon, V_h, Q_h, improved, dstar, rm, vm)


def value_iteration(M: TabularMDP, gamma=None, tol=1e-12, max_iter=1_000_000):
    """Optimal values and the least greedy optimal policy (``gamma < 1``)."""
    gamma = M.discount if gamma is None else gamma
    if gamma >= 1.0:
        raise ValueError("value iteration needs gamma < 1")
    P, R = M.effective()
    V = np.zeros(M.n_states)
    mask = np.where(M.legal, 0.0, -np.inf)
    for _ in range(max_iter):
        Q = R + gamma * np.einsum("ast,t->sa", P, V) + mask
        V2 = np.max(Q, axis=1)
        V2[~np.isfinite(V2)] = 0.0
        if np.max(np.abs(V2 - V)) <= tol:
            V = V2
            break
        V = V2
    Q = q_values(M, V, gamma)
    return V, greedy(M, Q)


def random_tabular_mdp(n_states, n_actions, rng: np.random.Generator, discount=0.9,
                       n_terminal=0, density=1.0) -> TabularMDP:
    """Random MDP with rewards in ``[-1, 0]`` and Dirichlet transitions."""
    P = np.zeros((n_actions, n_states, n_states))
    for a in range(n_actions):
        for s in range(n_states):
            support = rng.random(n_states) < density
            support[rng.integers(n_states)] = True
            w = rng.dirichlet(np.ones(int(support.sum())))
            P[a, s, support] = w
    R = -rng.random((n_states, n_actions))
    terminal = np.zeros(n_states, bool)
    if n_terminal:
        terminal[rng.choice(n_states, n_terminal, replace=False)] = True
    return TabularMDP(P, R, terminal=terminal, discount=discount)


def all_tabular_policies(M: TabularMDP):
    """Every deterministic policy choosing legal actions."""
    choices = [M.legal_actions(s) or [0] for s in range(M.n_states)]
    return [np.array(p) for p in itertools.product(*choices)]


def consistent_policies(hypotheses, trajectories):
    """Hypotheses agreeing with every recorded ``(state, action)`` pair."""
    pairs = {(s, a) for t in trajectories for s, a in t}
    return [h for h in hypotheses if all(h[s] == a for s, a in pairs)]


def sample_policy_trajectory(M: TabularMDP, policy, h: int, rng: random.Random):
    """``(state, action)`` pairs of an ``h``-step run of ``policy`` from ``I``."""
    s = M.sample_initial(rng)
    out = []
    for _ in range(h):
        if M.terminal[s]:
            break
        a = int(policy[s])
        out.append((s, a))
        s, _ = M.step(s, a, rng)
    return out


def mean_value(M: TabularMDP, V) -> float:
    """Expected value under the initial distribution."""
    return float(M.initial @ V)


# -- relational MDPs --------------------------------------------------------------

def flatten_relational(M, starts, max_states=DEFAULT_STATE_CAP, discount=None):
    """Enumerate the states reachable from ``starts`` into a :class:`TabularMDP`.

    Actions are all ground actions legal somewhere, in action order; an
    action illegal in a state is a self-loop paying its cost.

    Returns:
        ``(tabular, states, actions)``.

    Raises:
        ResourceError: if more than ``max_states`` states are reachable.
    """
    domain = M.domain
    index, states = {}, []
    queue = deque()
    for s in starts:
        if s not in index:
            index[s] = len(states)
            states.append(s)
            queue.append(s)
    edges = []
    actions = set()
    while queue:
        s = queue.popleft()
        if is_goal_state(s):
            continue
        for a in domain.legal_actions(s):
            actions.add(a)
            for p, s2 in domain.outcome_distribution(s, a):
                if s2 not in index:
                    if len(states) >= max_states:
                        raise ResourceError(
                            f"more than {max_states} reachable states")
                    index[s2] = len(states)
                    states.append(s2)
                    queue.append(s2)
                edges.append((index[s], a, index[s2], p))
    acts = sorted(actions)
    aidx = {a: i for i, a in enumerate(acts)}
    S, A = len(states), max(len(acts), 1)
    P = np.zeros((A, S, S))
    R = np.zeros((S, A))
    legal = np.zeros((S, A), bool)
    for s in range(S):
        for a in range(A):
            P[a, s, s] = 1.0
            R[s, a] = -domain.cost(acts[a]) if acts else 0.0
    touched = set()
    for s, a, s2, p in edges:
        ai = aidx[a]
        if (s, ai) not in touched:
            P[ai, s] = 0.0
            touched.add((s, ai))
            legal[s, ai] = True
        P[ai, s, s2] += p
    terminal = np.array([is_goal_state(s) for s in states])
    for s in range(S):
        if terminal[s]:
            legal[s] = False
    initial = np.zeros(S)
    for s in starts:
        initial[index[s]] += 1.0
    initial /= initial.sum()
    tab = TabularMDP(P, R, initial=initial, terminal=terminal, legal=legal,
                     discount=M.discount if discount is None else discount,
                     labels=states, action_labels=acts)
    return tab, states, acts
