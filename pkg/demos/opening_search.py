"""Run piKL on the standard opening for one power and show how beta moves
the policy between the search values and the anchor."""

import sys

from dipaf import HeuristicAnchor, SearchConfig, initial_state, load_map, run_pikl
from dipaf.search import kl_divergence, restricted_anchor

power = sys.argv[1] if len(sys.argv) > 1 else "France"
state = initial_state(load_map("standard"))
anchor = HeuristicAnchor()

for beta in (0.0, 0.1, 1.0, 10.0):
    cfg = SearchConfig(iterations=64, n_candidates=16, horizon=0, beta=beta, utility_scale=100.0, seed=0)
    ps = run_pikl(state, cfg, anchor, [power])[power]
    best = max(range(len(ps.candidates)), key=lambda k: ps.policy[k])
    kl = kl_divergence(ps.policy, restricted_anchor(ps))
    print(f"beta={beta:<5} KL(pi||tau)={kl:.3f}  top p={ps.policy[best]:.3f}  {'; '.join(ps.candidates[best].key())}")
