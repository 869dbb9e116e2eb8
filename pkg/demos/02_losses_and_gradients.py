"""Poke at the training objective and verify its gradients numerically.

Builds a random feature batch, evaluates the contrastive and
cross-lingual terms, then runs the finite-difference gate that the CLI
exposes as `lexcl grad-check`.
"""

import numpy as np

from lexcl.gradcheck import run_grad_check
from lexcl.losses import FeatureBatch, LossConfig, cl_loss, cm_loss, total_loss

rng = np.random.default_rng(0)
K, d = 4, 8
batch = FeatureBatch(R_I=rng.normal(size=(K, d)),
                     R_E=rng.normal(size=(K, d)),
                     R_F=rng.normal(size=(K, d)))

l_cm, g_cm = cm_loss(batch, tau=0.07)
l_cl, g_cl = cl_loss(batch)
print(f"contrastive loss:   {l_cm:.4f}   |grad| {np.linalg.norm(g_cm):.4f}")
print(f"cross-lingual loss: {l_cl:.4f}   |grad| {np.linalg.norm(g_cl):.4f}")

cfg = LossConfig()  # tau 0.07, weights 0.01 / 1.0
l, g = total_loss(batch, cfg)
print(f"combined ({cfg.gamma_cm}*cm + {cfg.gamma_cl}*cl): {l:.4f}")

# aligned features: the cross-lingual term vanishes, contrastive is happy
aligned = FeatureBatch(R_I=batch.R_I, R_E=batch.R_I.copy(),
                       R_F=batch.R_I.copy())
print(f"\nperfectly aligned batch: cm={cm_loss(aligned, 0.07)[0]:.4f} "
      f"cl={cl_loss(aligned)[0]:.4f}")

print("\nrunning the finite-difference gradient gate...")
res = run_grad_check()
print(f"max relative error over 5 random instances: {res.max_rel_err:.3e} "
      f"({'PASS' if res.passed() else 'FAIL'} at 1e-4)")
