"""Normalization constants shared by every module.

Coordinates: z_j = x_j + i y_j on a flat torus of side ``l`` per real axis.

* Kaehler form: omega = (i/2) sum_j dz_j ^ dzbar_j = sum_j dx_j ^ dy_j.
* Volume form: dV = omega^n / n!, total volume l^(2n).
* Contraction: Lambda(dz_j ^ dzbar_k) = -2i delta_jk, hence Lambda(omega) = n.
* Top-degree contraction: star(alpha * top) = STAR_TOP[n] * alpha where top is
  dz1^dzbar1 (n=1) or dz1^dz2^dzbar1^dzbar2 (n=2).
* Curvature convention: F = dbar(h^{-1} d h) for the Chern connection.
* Moment residual: m = KAPPA[n] * i Lambda F + [phi, phi^{*h}] - (lambda/2) Id.
  KAPPA[n] * i * STAR_TOP[n] = 1, so the Higgs term enters with unit weight.
"""

from __future__ import annotations

import math

STAR_TOP: dict[int, complex] = {1: -2j, 2: -4j}
LAMBDA_DIAG: complex = -2j
KAPPA: dict[int, float] = {1: 0.5, 2: 0.25}
HIGGS_WEIGHT: float = 1.0
TWO_PI: float = 2.0 * math.pi

# Weight of a (1,0) or (0,1) component in L2 inner products is 1/n.
ONE_FORM_WEIGHT: dict[int, float] = {1: 1.0, 2: 0.5}

# Curve state Phi pulls back to a surface Higgs field Phi / sqrt(2).
PULLBACK_HIGGS_SCALE: float = 1.0 / math.sqrt(2.0)


def as_dict() -> dict:
    """Constants recorded in run manifests and field sidecars."""
    return {
        "star_top": {str(k): [v.real, v.imag] for k, v in STAR_TOP.items()},
        "lambda_diag": [LAMBDA_DIAG.real, LAMBDA_DIAG.imag],
        "kappa": {str(k): v for k, v in KAPPA.items()},
        "higgs_weight": HIGGS_WEIGHT,
        "one_form_weight": {str(k): v for k, v in ONE_FORM_WEIGHT.items()},
        "pullback_higgs_scale": PULLBACK_HIGGS_SCALE,
        "volume_form": "omega^n/n!",
        "curvature": "F = dbar(h^-1 d h)",
    }
