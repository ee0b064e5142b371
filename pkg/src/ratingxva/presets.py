"""Annual rating transition matrices used by the shipped example scenarios.

``P1`` is the counterparty's, ``P2`` the investor's and ``P3`` the CDS
reference entity's matrix, all on the four-category scale A, B, C, D.
"""

import numpy as np

from .rating_model import TransitionMatrix

P1 = np.array(
    [
        [0.90, 0.08, 0.017, 0.003],
        [0.05, 0.85, 0.09, 0.01],
        [0.01, 0.09, 0.80, 0.10],
        [0.0, 0.0, 0.0, 1.0],
    ]
)

P2 = np.array(
    [
        [0.80, 0.10, 0.05, 0.05],
        [0.04, 0.90, 0.03, 0.03],
        [0.015, 0.10, 0.70, 0.185],
        [0.0, 0.0, 0.0, 1.0],
    ]
)

P3 = np.array(
    [
        [0.95, 0.03, 0.019, 0.001],
        [0.04, 0.85, 0.107, 0.003],
        [0.01, 0.19, 0.791, 0.009],
        [0.0, 0.0, 0.0, 1.0],
    ]
)


def matrices() -> dict:
    return {name: TransitionMatrix(m.copy()) for name, m in (("P1", P1), ("P2", P2), ("P3", P3))}
