"""Tabular softmax policy on a 4x4 gridworld, trained with CG-solved natural steps.

The Fisher is estimated from per-step score vectors and never formed: the
conjugate-gradient solver only needs Fisher-vector products, two matrix
multiplications with the stacked scores. Damping keeps the system positive
definite in states the batch never visits.

After training, the greedy action in every cell is printed as an arrow map.

Run:  python demos/04_gridworld.py
"""

import numpy as np

from natgrad import distributions as dist
from natgrad.experiment import bundled_config, run_experiment

cfg = bundled_config("gridworld")
table = run_experiment(cfg)

for r in table.rows[::5]:
    print(f"iter {r.iter:>3}  J_batch={r.objective:7.4f}  cg iters={r.solver_iters:>3}  "
          f"realized KL={r.realized_kl:.4f}")

# shortest path is 6 moves: 5 step penalties then the goal reward, discounted
optimum = sum(cfg.gamma**t * cfg.step_reward for t in range(5)) + cfg.gamma**5 * cfg.goal_reward
print(f"\nfinal J_batch {table.rows[-1].objective:.4f}, optimum {optimum:.4f}")

arrows = "^>v<"
logits = table.final_theta.values.reshape(cfg.height * cfg.width, 4)
print("\ngreedy policy (G = goal):")
for y in range(cfg.height):
    row = []
    for x in range(cfg.width):
        if (x, y) == cfg.goal:
            row.append("G")
        else:
            p = dist.softmax_probs(dist.params(logits[y * cfg.width + x]))
            row.append(arrows[int(np.argmax(p))])
    print("  " + " ".join(row))
