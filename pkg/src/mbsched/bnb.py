"""Exact branch-and-bound solver for MBS instances.

Depth-first search over bands in index order; at each level the branches are
idle, user 0, user 1, ... in that order. The incumbent is replaced only on
strict improvement, which together with the child order makes the returned
optimum the lexicographically smallest maximizer (idle < user 0 < user 1),
matching the brute-force oracle's tie-break.

Bounding. At a node with bands 0..d-1 decided, three admissible upper bounds
on the best completion are tried, cheapest first:

* static: served-so-far + suffix sum over remaining bands of
  max_u min(q_u, r_ub), precomputed against the full initial queues;
* per-user: served-so-far + sum_u min(residual_q_u, remaining rate mass of
  u), which relaxes band exclusivity but keeps the queue caps, so it is
  tight when a few backlogged queues span many bands;
* per-band: served-so-far + sum over remaining bands of
  max_u min(residual_q_u, r_ub), with independent residuals per band.

Each relaxation only ever over-promises, so pruning on bound <= incumbent is
safe. The incumbent value is seeded with (best heuristic objective - 1): no
maximizer is ever pruned by the seed, and the first strictly improving leaf
in DFS order is still the lexicographically smallest maximizer.

Two further cuts meter out the remaining bands as a budget, which none of
the relaxations above see through:

* saturation count: saturating user u needs at least
  ceil(residual_u / best remaining rate of u) distinct bands, and bands are
  exclusive, so when those needs exceed the bands left the completion value
  is at most (served-so-far + sum of residuals) - 1. That is a valid bound,
  so it prunes whenever it is <= the incumbent; the case that matters is an
  incumbent already at full-saturation value - 1.
* budgeted chunks: with m_u the best remaining rate of u, user u is worth
  at most m_u per band over at most ceil(residual_u / m_u) bands, so the
  completion is bounded by the best way to spend the remaining-band budget
  on such chunks, and spending greedily by descending m_u maximizes that
  linear value exactly. The chunk count rounds up, so each user may be
  credited up to one rate beyond its residual; the bound stays admissible
  because it only ever over-promises.

Two branches are skipped outright because the idle branch, explored earlier,
reaches the same values with a lexicographically smaller prefix: users whose
rate on the band is 0, and users whose residual backlog is already 0.
"""

from dataclasses import dataclass

from .lpformat import STATUS_LIMIT, STATUS_OPTIMAL
from .mbs import (
    Allocation,
    SnapshotInstance,
    schedule_greedy_backlog,
    schedule_maxci,
    served_for_assignment,
)
from .scenario import UNBOUNDED
from .timing import now_us

TIMEOUT_CHECK_MASK = 0x1FF  # consult the clock every 512 nodes


@dataclass
class BnbResult:
    allocation: Allocation
    objective: int
    nodes_explored: int
    status: str  # optimal, or limit-reached with the best incumbent


def solve_bb(inst: SnapshotInstance, max_nodes: int | None = None,
             timeout_s: float | None = None) -> BnbResult:
    k_n, n_n = inst.num_users, inst.num_bands
    rates = inst.rates
    backlog = inst.backlog
    users = range(k_n)
    # column-major copy: cols[b][u], the DFS walks bands outermost
    cols = [[rates[u][b] for u in users] for b in range(n_n)]

    # static bound table: per-band best queue-capped rate, suffix-summed
    static_suffix = [0] * (n_n + 1)
    for b in range(n_n - 1, -1, -1):
        col_best = max(min(backlog[u], cols[b][u]) for u in users)
        static_suffix[b] = static_suffix[b + 1] + col_best

    # per-user remaining rate mass: user_suffix[d][u] = sum of rates over bands d..N-1
    user_suffix = [[0] * k_n for _ in range(n_n + 1)]
    for b in range(n_n - 1, -1, -1):
        row = user_suffix[b]
        nxt = user_suffix[b + 1]
        col = cols[b]
        for u in users:
            row[u] = nxt[u] + col[u]

    # per-user best remaining rate: best_suffix[d][u] = max of rates over bands d..N-1
    best_suffix = [[0] * k_n for _ in range(n_n + 1)]
    for b in range(n_n - 1, -1, -1):
        row = best_suffix[b]
        nxt = best_suffix[b + 1]
        col = cols[b]
        for u in users:
            r = col[u]
            row[u] = r if r > nxt[u] else nxt[u]

    # an unbounded queue never saturates, so the band-count cut does not apply
    all_finite = all(q != UNBOUNDED for q in backlog)

    # users by descending best remaining rate, one ranking per depth, for the
    # budgeted-chunk bound (descending coefficient order maximizes it)
    order_m = [sorted(users, key=lambda u: -best_suffix[d][u]) for d in range(n_n)]

    # warm start: seed the incumbent VALUE one below the best heuristic so a
    # true optimum still strictly improves (keeps the lex tie-break intact)
    heur_alloc = schedule_greedy_backlog(inst)
    heur_value = sum(heur_alloc.served)
    maxci_alloc = schedule_maxci(inst)
    if sum(maxci_alloc.served) > heur_value:
        heur_alloc = maxci_alloc
        heur_value = sum(maxci_alloc.served)

    residual = list(backlog)
    assignment = [-1] * n_n
    best_assignment = None
    best_value = heur_value - 1
    served_total = 0
    sum_residual = sum(backlog) if all_finite else 0
    nodes = 0
    hit_limit = False
    deadline = None if timeout_s is None else now_us() + int(timeout_s * 1e6)

    def dfs(depth: int) -> bool:
        """Explore the subtree; True means a limit fired and search must stop."""
        nonlocal nodes, best_value, best_assignment, served_total, hit_limit
        nonlocal sum_residual
        if max_nodes is not None and nodes >= max_nodes:
            hit_limit = True
            return True
        nodes += 1
        if deadline is not None and (nodes & TIMEOUT_CHECK_MASK) == 0 and now_us() > deadline:
            hit_limit = True
            return True
        if depth == n_n:
            if served_total > best_value:
                best_value = served_total
                best_assignment = assignment.copy()
            return False
        incumbent = best_value
        if served_total + static_suffix[depth] <= incumbent:
            return False
        if all_finite and served_total + sum_residual - 1 <= incumbent:
            # only full saturation can still beat the incumbent: count the
            # bands each backlogged user needs at its best remaining rate
            best_row = best_suffix[depth]
            rem = n_n - depth
            needed = 0
            for u in users:
                r = residual[u]
                if r == 0:
                    continue
                m = best_row[u]
                if m == 0:
                    return False
                needed += (r + m - 1) // m
                if needed > rem:
                    return False
        mass = user_suffix[depth]
        bound = served_total
        for u in users:
            ru = residual[u]
            m = mass[u]
            bound += m if m < ru else ru
        if bound <= incumbent:
            return False
        best_row = best_suffix[depth]
        budget = n_n - depth
        bound = served_total
        for u in order_m[depth]:
            r = residual[u]
            if r == 0:
                continue
            m = best_row[u]
            if m == 0:
                break  # ranking is by descending m: everyone after is 0 too
            if r == UNBOUNDED:
                bound += budget * m
                budget = 0
            else:
                chunks = (r + m - 1) // m
                take = chunks if chunks < budget else budget
                bound += take * m
                budget -= take
            if bound > incumbent or budget == 0:
                break
        if bound <= incumbent:
            return False
        bound = served_total
        for b in range(depth, n_n):
            col = cols[b]
            m = 0
            for u in users:
                r = col[u]
                ru = residual[u]
                if r > ru:
                    r = ru
                if r > m:
                    m = r
            bound += m
        if bound <= incumbent:
            return False
        if dfs(depth + 1):  # idle branch first: assignment[depth] stays -1
            return True
        col = cols[depth]
        for u in users:
            r = col[u]
            if r == 0 or residual[u] == 0:
                continue
            delta = min(residual[u], r)
            assignment[depth] = u
            served_total += delta
            residual[u] -= delta
            sum_residual -= delta
            stop = dfs(depth + 1)
            sum_residual += delta
            residual[u] += delta
            served_total -= delta
            assignment[depth] = -1
            if stop:
                return True
        return False

    dfs(0)
    if best_assignment is None:
        # a limit fired before any leaf could beat the seed
        allocation = heur_alloc
        best = heur_value
    else:
        final = [u if u >= 0 else None for u in best_assignment]
        allocation = Allocation(final, served_for_assignment(inst, final))
        best = best_value
        if hit_limit and heur_value > best:
            allocation = heur_alloc
            best = heur_value
    status = STATUS_LIMIT if hit_limit else STATUS_OPTIMAL
    return BnbResult(allocation=allocation, objective=best,
                     nodes_explored=nodes, status=status)
