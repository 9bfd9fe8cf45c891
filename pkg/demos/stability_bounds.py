"""Tolerance-bound walkthrough.

Computes the largest admissible relative-entropy budget c_max for one
model and the largest admissible risk-sensitivity parameter theta_max
for another, printing the intermediate quantities so the composition of
each bound is visible.
"""

import numpy as np

from resilientkf import LinearGaussianModel
from resilientkf.stability import c_max, theta_max


def main():
    model_c = LinearGaussianModel(
        A=[[0.1, 1.0], [0.0, 0.6]],
        C=[[1.0, -1.0]],
        Q=[[0.9050, 0.8150], [0.8150, 0.7450]],
        R=[[1.0]],
    )
    rep = c_max(model_c, k=10, q=20)
    print("budget bound (c_max):")
    print(f"  phi_k (k=10)       = {rep.phi_k:.6f}")
    print(f"  filtered P (q=20)  =\n{np.array_str(rep.pbar_qq, precision=6)}")
    print(f"  c_max              = {rep.c_max:.6f}")
    print()

    model_t = LinearGaussianModel(
        A=[[0.1, 1.0], [0.0, 0.95]],
        C=[[1.0, -1.0]],
        Q=[[0.9050, 0.8575], [0.8575, 1.7225]],
        R=[[1.0]],
    )
    rep = theta_max(model_t, k=10)
    print("risk-sensitivity bound (theta_max):")
    print(f"  phi_k (k=10)       = {rep.phi_k:.6f}")
    print(f"  beta (free alpha)  = {rep.beta:.6f} "
          f"(alpha={rep.alpha:.3f}, rho={rep.rho:.3f})")
    print(f"  theta_max          = {rep.theta_max:.6f}")
    a1 = rep.search["alpha1"]
    print(f"  theta_max (alpha=1)= {a1['theta_max']:.6f}")


if __name__ == "__main__":
    main()
