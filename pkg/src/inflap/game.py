"""Monte Carlo simulator for boundary-biased eps-step tug-of-war.

Two players propose moves inside the closed eps-ball of the token; a biased
coin sends the token to player I's choice with probability
rho(x, z) / (rho(x, y) + rho(x, z)) (y = player I's move, z = player II's),
so a player stepping to a nearby boundary point wins the toss more often.
When the token reaches the boundary, player II pays

    g(exit) + eps/2 * sum_j rho(x_{j-1}, x_j) f(x_{j-1}).

Strategies are Markov (position only): pulling toward a target point, greedy
ascent/descent of a supplied value function (the move attaining S+/S-, ties
to the smallest point-id), or uniformly random over the ball.  Replications
use independent counter-derived RNG streams seeded by (seed, replication
index), so results are reproducible regardless of thread scheduling; games
that hit the step cap are excluded from the payoff mean and reported in
``nonterminated_fraction`` instead of carrying infinite penalties.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._ballindex import BallIndex, get_ball_index
from .operator import GridFunction
from .solver import ProblemSpec

__all__ = [
    "Strategy",
    "GameConfig",
    "GameStats",
    "GameError",
    "step",
    "payoff",
    "simulate",
    "duration_study",
    "DurationReport",
]

DRAW_CHUNK = 1024


class GameError(ValueError):
    pass


@dataclass(frozen=True)
class Strategy:
    """Markov strategy: where to move from each interior position."""

    kind: str  # "pull" | "greedy_max" | "greedy_min" | "uniform"
    target: int | None = None
    value: GridFunction | None = None

    @classmethod
    def pull_toward(cls, target: int) -> "Strategy":
        return cls("pull", target=int(target))

    @classmethod
    def greedy_max(cls, value: GridFunction) -> "Strategy":
        return cls("greedy_max", value=value)

    @classmethod
    def greedy_min(cls, value: GridFunction) -> "Strategy":
        return cls("greedy_min", value=value)

    @classmethod
    def uniform(cls) -> "Strategy":
        return cls("uniform")


@dataclass(frozen=True)
class GameConfig:
    problem: ProblemSpec
    start: int
    strategy_i: Strategy
    strategy_ii: Strategy
    replications: int
    seed: int
    max_steps: int | None = None
    keep_payoffs: bool = False

    def __post_init__(self):
        if self.replications < 1:
            raise GameError("need at least one replication")
        if self.problem.domain.is_boundary[self.start]:
            raise GameError(f"start point {self.start} must be interior")

    def effective_max_steps(self) -> int:
        if self.max_steps is not None:
            return int(self.max_steps)
        return int(min(1e7 / (self.problem.eps ** 2), 1e8))


@dataclass
class GameStats:
    mean_payoff: float
    stderr: float
    mean_duration: float
    nonterminated_fraction: float
    replications: int
    completed: int
    payoffs: np.ndarray | None = None

    def to_json_obj(self) -> dict:
        obj = {
            "mean_payoff": self.mean_payoff,
            "stderr": self.stderr,
            "mean_duration": self.mean_duration,
            "nonterminated_fraction": self.nonterminated_fraction,
            "replications": self.replications,
            "completed": self.completed,
        }
        if self.payoffs is not None:
            obj["payoffs"] = [float(p) for p in self.payoffs]
        return obj


# ---------------------------------------------------------------------------
# single-step dynamics and payoff accounting
# ---------------------------------------------------------------------------

def step(dom, eps: float, x: int, move_i: int, move_ii: int,
         draw: float) -> int:
    """One coin toss: returns move_i when draw < rho(x, move_ii) /
    (rho(x, move_i) + rho(x, move_ii)), else move_ii."""
    bi = get_ball_index(dom, eps)
    ids, rho = bi.members(int(x))
    pos_i = np.searchsorted(ids, move_i)
    pos_ii = np.searchsorted(ids, move_ii)
    if pos_i >= ids.size or ids[pos_i] != move_i:
        raise GameError(f"move {move_i} is outside the eps-ball of {x}")
    if pos_ii >= ids.size or ids[pos_ii] != move_ii:
        raise GameError(f"move {move_ii} is outside the eps-ball of {x}")
    p_i = rho[pos_ii] / (rho[pos_i] + rho[pos_ii])
    return int(move_i) if draw < p_i else int(move_ii)


def payoff(trajectory, f: GridFunction, g: GridFunction, eps: float) -> float:
    """Game payoff of a trajectory ending on the boundary (or truncated;
    the simulator flags truncated runs instead of paying them)."""
    from .geometry import rho as rho_fn

    dom = f.domain
    acc = 0.0
    for a, b in zip(trajectory[:-1], trajectory[1:]):
        acc += rho_fn(dom, eps, int(a), int(b)) * f.values[a]
    return float(g.values[trajectory[-1]] + 0.5 * eps * acc)


# ---------------------------------------------------------------------------
# strategy tables
# ---------------------------------------------------------------------------

def _strategy_tables(strategy: Strategy, bi: BallIndex):
    """(kind_code, move table, rho table) per interior-order position."""
    dom = bi.dom
    ids_int = bi.interior_ids
    if strategy.kind == "uniform":
        return _kernels.UNIFORM, np.empty(0, np.int64), np.empty(0)
    moves = np.empty(ids_int.size, dtype=np.int64)
    rhos = np.empty(ids_int.size)
    if strategy.kind == "pull":
        if strategy.target is None:
            raise GameError("pull strategy needs a target point")
        dist_t = dom.distance_row(int(strategy.target))
        for k, x in enumerate(ids_int):
            ids, rho = bi.members(int(x))
            j = int(np.argmin(dist_t[ids]))
            moves[k] = ids[j]
            rhos[k] = rho[j]
    elif strategy.kind in ("greedy_max", "greedy_min"):
        v = strategy.value
        if v is None or v.domain is not dom:
            raise GameError("greedy strategy needs a value function on the "
                            "game domain")
        sign = 1.0 if strategy.kind == "greedy_max" else -1.0
        for k, x in enumerate(ids_int):
            ids, rho = bi.members(int(x))
            slopes = sign * (v.values[ids] - v.values[x]) / rho
            j = int(np.argmax(slopes))
            moves[k] = ids[j]
            rhos[k] = rho[j]
    else:
        raise GameError(f"unknown strategy kind {strategy.kind!r}")
    return _kernels.TABLE, moves, rhos


def _member_csr(bi: BallIndex):
    """Full ball member CSR (ids and rho, center included) for uniform play."""
    ids_int = bi.interior_ids
    ptr = np.zeros(ids_int.size + 1, dtype=np.int64)
    id_parts, rho_parts = [], []
    for k, x in enumerate(ids_int):
        ids, rho = bi.members(int(x))
        id_parts.append(ids)
        rho_parts.append(rho)
        ptr[k + 1] = ptr[k] + ids.size
    return ptr, np.concatenate(id_parts).astype(np.int64), \
        np.concatenate(rho_parts)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def simulate(cfg: GameConfig, mirror_draws: bool = False) -> GameStats:
    """Play independent replications and aggregate.

    ``mirror_draws`` replaces every consumed draw d by 1 - d (testing hook
    for the antisymmetry property).  Aggregation runs over the
    replication-indexed arrays with exact summation, so thread scheduling
    cannot perturb the result; worker count is capped by INFLAP_THREADS.
    """
    p = cfg.problem
    dom, eps = p.domain, p.eps
    bi = get_ball_index(dom, eps)
    kind_i, move_i, rho_i = _strategy_tables(cfg.strategy_i, bi)
    kind_ii, move_ii, rho_ii = _strategy_tables(cfg.strategy_ii, bi)
    if _kernels.UNIFORM in (kind_i, kind_ii):
        memb_ptr, memb_ids, memb_rho = _member_csr(bi)
    else:
        memb_ptr = np.zeros(1, dtype=np.int64)
        memb_ids = np.empty(0, dtype=np.int64)
        memb_rho = np.empty(0)
    max_steps = cfg.effective_max_steps()
    n = cfg.replications
    payoffs = np.full(n, np.nan)
    durations = np.zeros(n, dtype=np.int64)
    completed = np.zeros(n, dtype=bool)
    f_vals, g_vals = p.f.values, p.g.values
    is_bd = dom.is_boundary.astype(np.uint8)
    pos_of_point = bi.pos_of_point
    mirror = 1 if mirror_draws else 0

    tables = (kind_i, move_i, rho_i, kind_ii, move_ii, rho_ii,
              memb_ptr, memb_ids, memb_rho, f_vals, g_vals, is_bd,
              pos_of_point, eps)

    def run_block(lo: int, hi: int) -> None:
        for rep in range(lo, hi):
            pos, acc, steps, status, _ = _play_replication(
                cfg.seed, rep, cfg.start, max_steps, mirror, tables)
            durations[rep] = steps
            if status == 1:
                completed[rep] = True
                payoffs[rep] = g_vals[pos] + 0.5 * eps * acc

    workers = _worker_count()
    if workers <= 1 or n < 2 * workers:
        run_block(0, n)
    else:
        bounds = np.linspace(0, n, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_block, int(a), int(b))
                       for a, b in zip(bounds[:-1], bounds[1:])
                       if b > a]
            for fut in futures:
                fut.result()

    done = np.flatnonzero(completed)
    n_done = done.size
    if n_done:
        mean = math.fsum(payoffs[i] for i in done) / n_done
        if n_done > 1:
            var = math.fsum((payoffs[i] - mean) ** 2 for i in done) / (n_done - 1)
            stderr = math.sqrt(var / n_done)
        else:
            stderr = 0.0
        mean_dur = math.fsum(float(durations[i]) for i in done) / n_done
    else:
        mean, stderr, mean_dur = math.nan, math.nan, math.nan
    return GameStats(
        mean_payoff=mean,
        stderr=stderr,
        mean_duration=mean_dur,
        nonterminated_fraction=1.0 - n_done / n,
        replications=n,
        completed=int(n_done),
        payoffs=payoffs if cfg.keep_payoffs else None,
    )


def _play_replication(seed: int, rep: int, start: int, max_steps: int,
                      mirror: int, tables, record: bool = False):
    """One replication on its own (seed, rep) stream; chunked draws feed the
    kernel segment loop.  Returns (pos, acc, steps, status, positions)."""
    rng = np.random.default_rng([seed & (2 ** 64 - 1), rep])
    pos, acc, steps = start, 0.0, 0
    status = 0
    trail: list[int] | None = [] if record else None
    rec_buf = np.zeros(DRAW_CHUNK, dtype=np.int64) if record else None
    while status == 0:
        draws = rng.random(DRAW_CHUNK)
        prev_steps = steps
        pos, acc, steps, status, _ = _kernels.game_segment(
            pos, acc, steps, max_steps, draws, mirror, *tables,
            record=rec_buf)
        if record:
            trail.extend(int(p) for p in rec_buf[:steps - prev_steps])
    return pos, acc, steps, status, trail


def record_trajectories(cfg: GameConfig, mirror_draws: bool = False):
    """Replay every replication recording (replication, step, point-id)
    rows; identical streams to :func:`simulate` (same chunked draws)."""
    p = cfg.problem
    bi = get_ball_index(p.domain, p.eps)
    kind_i, move_i, rho_i = _strategy_tables(cfg.strategy_i, bi)
    kind_ii, move_ii, rho_ii = _strategy_tables(cfg.strategy_ii, bi)
    if _kernels.UNIFORM in (kind_i, kind_ii):
        memb_ptr, memb_ids, memb_rho = _member_csr(bi)
    else:
        memb_ptr = np.zeros(1, dtype=np.int64)
        memb_ids = np.empty(0, dtype=np.int64)
        memb_rho = np.empty(0)
    tables = (kind_i, move_i, rho_i, kind_ii, move_ii, rho_ii,
              memb_ptr, memb_ids, memb_rho, p.f.values, p.g.values,
              p.domain.is_boundary.astype(np.uint8), bi.pos_of_point, p.eps)
    rows = []
    for rep in range(cfg.replications):
        _, _, _, _, trail = _play_replication(
            cfg.seed, rep, cfg.start, cfg.effective_max_steps(),
            1 if mirror_draws else 0, tables, record=True)
        rows.append((rep, 0, cfg.start))
        rows.extend((rep, s + 1, pid) for s, pid in enumerate(trail))
    return rows


def _worker_count() -> int:
    env = os.environ.get("INFLAP_THREADS", "")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# duration scaling study
# ---------------------------------------------------------------------------

@dataclass
class DurationReport:
    rows: list[tuple[float, float, float]]  # (eps, mean_duration, nonterm)
    slope: float
    delta: float
    excluded: list[float]

    def to_json_obj(self) -> dict:
        return {"rows": [[e, d, nf] for e, d, nf in self.rows],
                "slope": self.slope, "delta": self.delta,
                "excluded": self.excluded}


def duration_study(make_instance, eps_list, delta: float = 0.1,
                   replications: int = 2000, seed: int = 20240901
                   ) -> DurationReport:
    """Mean game duration of greedy-vs-greedy play across eps.

    ``make_instance(eps)`` must return (ProblemSpec with f == 0, start id).
    Player I plays greedy ascent of the solved maximal solution, player II
    greedy descent.  Fits log(mean_duration) against log(1/eps); eps values
    with more than 1% truncated games are excluded (with a warning entry).
    ``delta`` only labels the payoff slack of the strategy pair; it does not
    enter the dynamics.
    """
    from .solver import solve_max

    if len(eps_list) < 2:
        raise GameError("duration study needs at least two eps values")
    rows, excluded = [], []
    for eps in eps_list:
        prob, start = make_instance(eps)
        fi = prob.f.values[prob.domain.interior_ids]
        if fi.size and np.max(np.abs(fi)) != 0.0:
            raise GameError("duration study requires a vanishing running "
                            "payoff")
        u = solve_max(prob)
        cfg = GameConfig(prob, start, Strategy.greedy_max(u),
                         Strategy.greedy_min(u), replications, seed)
        stats = simulate(cfg)
        if stats.nonterminated_fraction > 0.01:
            excluded.append(eps)
            continue
        rows.append((float(eps), stats.mean_duration,
                     stats.nonterminated_fraction))
    if len(rows) < 2:
        raise GameError("too few eps values survived the truncation filter")
    xs = np.log([1.0 / e for e, _, _ in rows])
    ys = np.log([d for _, d, _ in rows])
    slope = float(np.polyfit(xs, ys, 1)[0])
    return DurationReport(rows, slope, float(delta), excluded)
