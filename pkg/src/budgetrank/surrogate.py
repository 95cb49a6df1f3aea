"""Linear surrogate: seeded init, utility, ridge refits, estimation error."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DuplicateObservationError

DEFAULT_RIDGE = 1e-3


def init_weights(dim: int, seed: int) -> np.ndarray:
    """dim independent standard-normal draws from a seeded generator."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return np.random.default_rng(seed).standard_normal(dim)


def estimate_utility(w: np.ndarray, x: np.ndarray) -> float:
    if w.shape != x.shape:
        raise ValueError(f"dimension mismatch: {w.shape} vs {x.shape}")
    return float(w @ x)


def estimation_error(w: np.ndarray, x: np.ndarray, y: float) -> float:
    """Squared discrepancy between the teacher score and the estimate."""
    return 0.5 * (y - estimate_utility(w, x)) ** 2


@dataclass(frozen=True)
class Observation:
    doc_id: str
    x: np.ndarray           # feature row in the standardized space
    y: float                # teacher score in [0, 1]
    batch_index: int


@dataclass
class SurrogateModel:
    """Weights plus the growing observation buffer they were fit to.

    ``update`` refits over all accumulated observations by default
    (regularized least squares via the normal equations); ``batch_only``
    restricts the objective to the newest batch.
    """

    w: np.ndarray
    ridge: float = DEFAULT_RIDGE
    seed: int = 0
    batch_only: bool = False
    observations: list[Observation] = field(default_factory=list)
    used_pseudoinverse: bool = False
    _seen: set[str] = field(default_factory=set, repr=False)

    @classmethod
    def create(
        cls,
        dim: int,
        seed: int,
        ridge: float = DEFAULT_RIDGE,
        batch_only: bool = False,
    ) -> "SurrogateModel":
        return cls(w=init_weights(dim, seed), ridge=ridge, seed=seed,
                   batch_only=batch_only)

    @property
    def dim(self) -> int:
        return len(self.w)

    def utilities(self, rows: np.ndarray) -> np.ndarray:
        if rows.shape[1] != self.dim:
            raise ValueError("feature dimension mismatch")
        return rows @ self.w

    def update(self, new_observations: list[Observation]) -> np.ndarray:
        """Ingest a batch of teacher observations and refit the weights.

        Each document may be observed at most once for the model's lifetime.
        With ridge 0 and a singular system the minimum-norm solution is used
        and flagged via ``used_pseudoinverse``.
        """
        for obs in new_observations:
            if obs.doc_id in self._seen:
                raise DuplicateObservationError(
                    f"document already observed: {obs.doc_id!r}"
                )
            if len(obs.x) != self.dim:
                raise ValueError("observation dimension mismatch")
        for obs in new_observations:
            self._seen.add(obs.doc_id)
            self.observations.append(obs)
        if not self.observations:
            return self.w
        fit_set = new_observations if self.batch_only else self.observations
        if not fit_set:
            return self.w
        x_mat = np.stack([obs.x for obs in fit_set])
        y_vec = np.array([obs.y for obs in fit_set])
        self.w = self._solve(x_mat, y_vec)
        return self.w

    def _solve(self, x_mat: np.ndarray, y_vec: np.ndarray) -> np.ndarray:
        if self.ridge > 0.0:
            gram = x_mat.T @ x_mat + self.ridge * np.eye(self.dim)
            return np.linalg.solve(gram, x_mat.T @ y_vec)
        # ridge 0: least squares directly; rank deficiency falls back to the
        # minimum-norm solution, which is what lstsq returns.
        solution, _, rank, _ = np.linalg.lstsq(x_mat, y_vec, rcond=None)
        if rank < self.dim:
            self.used_pseudoinverse = True
        return solution

    def training_loss(self, w: np.ndarray | None = None) -> float:
        """Regularized least-squares objective over all observations."""
        weights = self.w if w is None else w
        residual = sum(
            (obs.y - float(weights @ obs.x)) ** 2 for obs in self.observations
        )
        return 0.5 * residual + 0.5 * self.ridge * float(weights @ weights)


def weight_dump_lines(
    query_id: str, w: np.ndarray, labels: list[str]
) -> list[str]:
    """TSV lines ``qid, feature_label, weight`` for interpretability dumps."""
    if len(w) != len(labels):
        raise ValueError("label count must match weight dimension")
    return [f"{query_id}\t{label}\t{value:.10g}" for label, value in zip(labels, w)]
