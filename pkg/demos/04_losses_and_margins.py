"""The loss zoo: composite-label cross-entropy, the margin machinery, and
the adversary losses of both backbones.
"""

import math

import numpy as np

from saflab import (
    MarginParams,
    Tensor,
    conditional_entropy,
    cross_entropy,
    cross_entropy_divergence,
    dann_domain_loss,
    empirical_margin_disparity,
    empirical_mdd_estimate,
    margin,
    margin_loss,
    mdd_adversarial_loss,
)

rng = np.random.default_rng(0)

# composite-label cross-entropy reduces to the ordinary one on one-hot rows
logits = Tensor(rng.normal(size=(4, 3)))
labels = np.array([0, 2, 1, 1])
ce = cross_entropy(None, logits, labels).item()
ced = cross_entropy_divergence(None, logits, np.eye(3)[labels]).item()
print(f"CE = {ce:.6f}, CED on one-hot = {ced:.6f}, diff = {abs(ce - ced):.2e}")

soft = 0.6 * np.eye(3)[labels] + 0.4 * np.full((4, 3), 1 / 3)
print(f"CED on softened labels = {cross_entropy_divergence(None, logits, soft).item():.6f}")

# margin of a prediction against an exemplar label, and its hinge-style loss
params = MarginParams.from_gamma(4.0)
row = np.array([0.2, 0.7, 0.1])
for exemplar in (0, 1):
    m = margin(row, exemplar)
    print(f"margin(row, class {exemplar}) = {m:+.3f} -> loss {margin_loss(m, params.rho):.3f}")

# disparity between two classifiers feeds the trained-adversary divergence estimate
probs_c = rng.dirichlet(np.ones(3), size=50)
probs_d = rng.dirichlet(np.ones(3), size=50)
d_s = empirical_margin_disparity(probs_c, probs_d, params.rho)
d_t = empirical_margin_disparity(probs_d, probs_c, params.rho)
print(f"disparities: source-like {d_s:.3f}, target-like {d_t:.3f}, "
      f"estimate {empirical_mdd_estimate(d_s, d_t):+.3f}")

# the two adversary losses at their uniform starting points
k = 2
zero2 = Tensor(np.zeros((6, k)))
print(f"domain-classifier loss at uniform outputs: {dann_domain_loss(None, zero2, zero2).item():.4f}"
      f" (= ln 2 = {math.log(2):.4f})")
c_logits = Tensor(rng.normal(size=(6, k)), requires_grad=False)
mdd = mdd_adversarial_loss(None, c_logits, zero2, c_logits, zero2, params).item()
print(f"margin-backbone loss at uniform adversary: {mdd:.4f} (= (1+gamma) ln 2 = "
      f"{(1 + params.gamma) * math.log(2):.4f})")

print("entropy of a confident row:", conditional_entropy([[0.99, 0.01]])[0])
print("entropy of the uniform row:", conditional_entropy([[0.5, 0.5]])[0], "= ln 2")
