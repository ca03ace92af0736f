"""Regularisation weights on neuron parameters.

Three 1-homogeneous weights w(a, b), each inducing the potential
V(a, b, c) = |c| w(a, b):

  * TV: w = ||(a, b)||, the variation-norm weight.
  * LabelNoisePaper: w_b = sqrt(E_D[relu(a.x + b)^2]), the data-dependent
    weight minimised implicitly by label-noise SGD.
  * LabelNoiseExact: the full closed-form minimum over the rescaling orbit
    of the raw implicit potential, which carries an extra active-set factor
    2 sqrt(E_D[(1 + |x|^2) chi]); see rescale_minimize.

Restricted to one cell of the arrangement, each weight is the gauge
g(v) = kappa * sqrt(v^T Q v) of a quadratic form, which is what the
finite solver consumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .arrangement import CellDecomposition
from .errors import PreconditionError
from .model import Dataset, Neuron, relu

# equality-vs-strict threshold in the convexity classifier
CONVEXITY_EQ_TOL = 1e-10
# two parameter directions count as proportional below this angle
PROPORTIONAL_TOL = 1e-8


class Variant(Enum):
    TV = "tv"
    LABEL_NOISE_PAPER = "label-noise"
    LABEL_NOISE_EXACT = "label-noise-exact"


@dataclass(frozen=True)
class PotentialKind:
    variant: Variant
    dataset: Dataset | None = None

    def __post_init__(self):
        if self.variant is not Variant.TV and self.dataset is None:
            raise PreconditionError(
                f"{self.variant.value} potential requires a dataset"
            )

    @classmethod
    def tv(cls) -> "PotentialKind":
        return cls(Variant.TV)

    @classmethod
    def label_noise(cls, dataset: Dataset) -> "PotentialKind":
        return cls(Variant.LABEL_NOISE_PAPER, dataset)

    @classmethod
    def label_noise_exact(cls, dataset: Dataset) -> "PotentialKind":
        return cls(Variant.LABEL_NOISE_EXACT, dataset)

    @classmethod
    def from_flag(cls, flag: str, dataset: Dataset | None) -> "PotentialKind":
        variant = Variant(flag)
        return cls(variant, dataset if variant is not Variant.TV else None)


def weight_tv(a, b: float) -> float:
    """Euclidean norm of (a, b)."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    return float(np.sqrt(a @ a + b * b))


def weight_label_noise(a, b: float, dataset: Dataset) -> float:
    """sqrt of the dataset average of relu(a.x + b)^2."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    pre = dataset.points @ a + b
    return float(np.sqrt(np.mean(relu(pre) ** 2)))


def _active_second_moments(neuron: Neuron, dataset: Dataset) -> tuple[float, float]:
    """A = E_D[relu(a.x+b)^2], B = c^2 E_D[(1+|x|^2) chi_{a.x+b>=0}]."""
    pre = dataset.points @ neuron.a + neuron.b
    active = pre >= 0.0
    A = float(np.mean(relu(pre) ** 2))
    B = neuron.c**2 * float(
        np.mean((1.0 + np.sum(dataset.points**2, axis=1)) * active)
    )
    return A, B


def v_tilde(neuron: Neuron, dataset: Dataset) -> float:
    """Raw implicit potential E_D[relu(a.x+b)^2 + (1+|x|^2) c^2 chi_{a.x+b>=0}].

    Equals the dataset average of the squared parameter gradient of the
    neuron output (the integrand of the implicit regulariser).
    """
    A, B = _active_second_moments(neuron, dataset)
    return A + B


def rescale_minimize(neuron: Neuron, dataset: Dataset) -> tuple[float, float]:
    """Minimise v_tilde over the degeneracy orbit (la, lb, c/l), l > 0.

    The active-set indicator is orbit-invariant, so the objective is
    l^2 A + B / l^2 with minimiser l* = (B/A)^{1/4} and value 2 sqrt(A B).
    Returns (l*, value); (1, 0) when the neuron is inactive on the dataset.
    """
    A, B = _active_second_moments(neuron, dataset)
    if A <= 0.0 or B <= 0.0:
        return 1.0, 0.0
    return float((B / A) ** 0.25), float(2.0 * np.sqrt(A * B))


def potential(kind: PotentialKind, neuron: Neuron) -> float:
    """V(a, b, c) for the selected variant."""
    if kind.variant is Variant.TV:
        return abs(neuron.c) * weight_tv(neuron.a, neuron.b)
    if kind.variant is Variant.LABEL_NOISE_PAPER:
        return abs(neuron.c) * weight_label_noise(neuron.a, neuron.b, kind.dataset)
    return rescale_minimize(neuron, kind.dataset)[1]


def weight(kind: PotentialKind, theta: np.ndarray) -> float:
    """The 1-homogeneous weight w(a, b) with c split off (c = 1)."""
    theta = np.asarray(theta, dtype=float).ravel()
    return potential(kind, Neuron(theta[:-1], theta[-1], 1.0))


@dataclass(frozen=True)
class CellGauge:
    """Per-cell restriction of a potential: g(v) = kappa * sqrt(v^T Q v)."""

    cell_index: int
    Q: np.ndarray  # (d+1, d+1) symmetric PSD
    kappa: float

    def __call__(self, v: np.ndarray) -> float:
        v = np.asarray(v, dtype=float).ravel()
        return self.kappa * float(np.sqrt(max(0.0, v @ self.Q @ v)))


def cell_gauge(
    kind: PotentialKind, decomp: CellDecomposition, cell_index: int
) -> CellGauge:
    """Build the gauge of the potential restricted to one cell.

    On the cell, g(c * theta) = potential(kind, (theta, c)) exactly; cells
    with empty active set get the zero gauge for the label-noise variants.
    """
    k = decomp.lifted.shape[1]
    if kind.variant is Variant.TV:
        return CellGauge(cell_index, np.eye(k), 1.0)
    cell = decomp.cells[cell_index]
    active = list(cell.active_set)
    n = decomp.n
    Q = np.zeros((k, k))
    for i in active:
        Q += np.outer(decomp.lifted[i], decomp.lifted[i])
    Q /= n
    # PSD repair: clamp tiny negative eigenvalues from roundoff
    evals, evecs = np.linalg.eigh(Q)
    Q = (evecs * np.maximum(evals, 0.0)) @ evecs.T
    if kind.variant is Variant.LABEL_NOISE_PAPER:
        kappa = 1.0
    else:
        sq = np.sum(decomp.lifted[active, :-1] ** 2, axis=1) if active else np.zeros(0)
        kappa = 2.0 * float(np.sqrt(np.sum(1.0 + sq) / n)) if active else 0.0
    return CellGauge(cell_index, Q, kappa)


def _proportional(theta: np.ndarray, theta_p: np.ndarray) -> bool:
    n1 = np.linalg.norm(theta)
    n2 = np.linalg.norm(theta_p)
    if n1 == 0.0 or n2 == 0.0:
        return True
    cosang = np.clip((theta @ theta_p) / (n1 * n2), -1.0, 1.0)
    return float(np.arccos(cosang)) < PROPORTIONAL_TOL


def effective_convexity_test(
    kind: PotentialKind, theta: np.ndarray, theta_p: np.ndarray, lam: float
) -> str:
    """Classify the convexity inequality of w at one interpolation point.

    Returns "strict", "equality_proportional" or "violation". 1-homogeneous
    weights are never strictly convex along rays, so equality together with
    proportional parameters is the expected degenerate outcome.
    """
    if not 0.0 < lam < 1.0:
        raise PreconditionError("interpolation weight must lie in (0, 1)")
    theta = np.asarray(theta, dtype=float).ravel()
    theta_p = np.asarray(theta_p, dtype=float).ravel()
    mid = lam * theta + (1.0 - lam) * theta_p
    lhs = weight(kind, mid)
    rhs = lam * weight(kind, theta) + (1.0 - lam) * weight(kind, theta_p)
    scale = max(1.0, abs(rhs))
    if lhs > rhs + CONVEXITY_EQ_TOL * scale:
        return "violation"
    if rhs - lhs > CONVEXITY_EQ_TOL * scale:
        return "strict"
    # equality is only legitimate along a common ray
    return "equality_proportional" if _proportional(theta, theta_p) else "violation"


def at_bulk(decomp: CellDecomposition, cell_index: int) -> bool:
    """True when the cell's active lifted points span R^{d+1}.

    Full rank of the active set makes the activation map locally injective,
    which is what licenses strict effective convexity there.
    """
    cell = decomp.cells[cell_index]
    active = list(cell.active_set)
    if not active:
        return False
    sub = decomp.lifted[active]
    return int(np.linalg.matrix_rank(sub, tol=1e-10)) == decomp.lifted.shape[1]
