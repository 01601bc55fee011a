"""Monte Carlo rejection-sampling oracle for the aperture integrals.

Independent of the quadrature path: directions are sampled uniformly on the
sphere, kept if they fall inside the aperture, and the channel-weighted
intensities are averaged over the kept samples.  Intensities are written
directly from the emission patterns (sigma weight 2/3, pi weight 1/3) so the
only shared ingredient with the library is the physics being tested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FOUR_PI = 4.0 * math.pi


@dataclass
class McProbs:
    p_sigma_h: float
    p_sigma_v: float
    p_pi: float
    se_sigma_h: float
    se_sigma_v: float
    se_pi: float
    solid_angle: float
    se_solid_angle: float
    n_accepted: int


def mc_collection_probabilities(aperture, n_samples: int = 1_000_000, seed: int = 20240, chunk: int = 2_000_000) -> McProbs:
    rng = np.random.default_rng(seed)
    cos_a1 = math.cos(aperture.alpha1)
    sin_a2 = math.sin(aperture.alpha2) if aperture.kind == "slit" else None

    n_acc = 0
    sums = np.zeros(3)
    sums_sq = np.zeros(3)
    remaining = n_samples
    while remaining > 0:
        n = min(chunk, remaining)
        remaining -= n
        z = rng.uniform(-1.0, 1.0, n)  # cos(theta)
        phi = rng.uniform(0.0, 2.0 * math.pi, n)
        nx = np.sqrt(1.0 - z * z) * np.cos(phi)
        inside = nx >= cos_a1
        if sin_a2 is not None:
            inside &= np.abs(z) <= sin_a2
        zk = z[inside]
        n_acc += zk.size
        # channel-weighted intensities relative to the isotropic total 1/(4 pi):
        # sigma-H: (2/3)(3/16pi) = 1/(8pi);  sigma-V: cos^2 / (8pi);  pi: sin^2 / (8pi)
        vals = np.empty((3, zk.size))
        vals[0] = 0.5
        vals[1] = 0.5 * zk * zk
        vals[2] = 0.5 * (1.0 - zk * zk)
        sums += vals.sum(axis=1)
        sums_sq += (vals * vals).sum(axis=1)

    if n_acc == 0:
        raise ValueError("no samples accepted; aperture too small for this sample count")
    means = sums / n_acc
    variances = np.maximum(sums_sq / n_acc - means**2, 0.0)
    ses = np.sqrt(variances / n_acc)
    p_in = n_acc / n_samples
    omega = FOUR_PI * p_in
    se_omega = FOUR_PI * math.sqrt(p_in * (1.0 - p_in) / n_samples)
    return McProbs(
        p_sigma_h=means[0],
        p_sigma_v=means[1],
        p_pi=means[2],
        se_sigma_h=ses[0],
        se_sigma_v=ses[1],
        se_pi=ses[2],
        solid_angle=omega,
        se_solid_angle=se_omega,
        n_accepted=n_acc,
    )
