"""Entropic prox step on the restricted simplex.

Shows the closed form for eps = 0, the floor at eps once a coordinate would
fall below it, and the KL divergence between successive iterates.

Run: python3 demos/prox_step.py
"""

import numpy as np

from simcal import entropic_prox_step, kl_divergence

p = np.full(4, 0.25)
xi = np.array([0.0, 0.5, 2.0, 8.0])

free = entropic_prox_step(p, xi, eps=0.0)
print("eps = 0      :", np.round(free, 6))
print("closed form  :", np.round(p * np.exp(-xi) / np.sum(p * np.exp(-xi)), 6))

floored = entropic_prox_step(p, xi, eps=0.01)
print("eps = 0.01   :", np.round(floored, 6), " min =", floored.min())
print("KL(next | p) :", round(kl_divergence(floored, p), 6))

# Repeating the same step drives mass to the cheapest coordinate
# but never below the floor.
q = p
for _ in range(20):
    q = entropic_prox_step(q, xi, eps=0.01)
print("20 steps     :", np.round(q, 6))
