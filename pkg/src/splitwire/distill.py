"""Feature-mimic losses with analytic gradients, plus a toy trainer.

The loss over a batch is the weighted sum, across tap points j, of the sum of
squared errors between teacher and student outputs at that tap:

    loss = sum_j  lam_j * sum_i (t_j[i] - s_j[i])^2

With a single tap and lam = 1 this reduces exactly to the plain SSE mimic
loss. The gradient with respect to a student tap output is
2 * lam_j * (s_j - t_j).

Toy models are stacks of affine maps. That scale is enough to exercise the
loss math and the rank-limited compression behaviour of a narrow bottleneck
layer, and it admits a closed-form verification oracle: the best rank-b
linear approximation error (sum of squared trailing singular values),
computed here by an independent one-sided Jacobi SVD.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import ArgumentError, ShapeError
from .tensor import Tensor

__all__ = [
    "TapPoint",
    "AffineLayer",
    "ToyHead",
    "TrainConfig",
    "EpochStats",
    "sse_loss",
    "generalized_loss",
    "loss_grad",
    "train_toy",
    "evaluate_loss",
    "eckart_young_bound",
    "jacobi_singular_values",
    "write_history_csv",
    "fixture_names",
    "get_fixture",
]


# --- losses -----------------------------------------------------------------

@dataclass(frozen=True)
class TapPoint:
    """One compared layer output: index, scale factor, teacher and student."""

    index: int
    lam: float
    teacher_out: Tensor
    student_out: Tensor

    def __post_init__(self):
        if self.lam < 0:
            raise ArgumentError(f"tap {self.index}: scale factor must be >= 0")
        if self.teacher_out.shape != self.student_out.shape:
            raise ShapeError(
                f"tap {self.index}: teacher shape {self.teacher_out.shape} "
                f"!= student shape {self.student_out.shape}"
            )


def sse_loss(t_out: Tensor, s_out: Tensor) -> float:
    """Sum of squared errors between two tensors of equal shape."""
    if t_out.shape != s_out.shape:
        raise ShapeError(f"shape mismatch: {t_out.shape} vs {s_out.shape}")
    d = t_out.data.astype(np.float64) - s_out.data.astype(np.float64)
    return float(np.dot(d, d))


def generalized_loss(taps: list[TapPoint], normalize: bool = False) -> float:
    """Weighted sum of per-tap SSE losses.

    ``normalize=True`` divides each tap's SSE by its element count; the
    default is the plain unnormalized sum.
    """
    if not taps:
        raise ArgumentError("need at least one tap point")
    total = 0.0
    for tap in taps:
        term = sse_loss(tap.teacher_out, tap.student_out)
        if normalize:
            term /= tap.teacher_out.numel
        total += tap.lam * term
    return total


def loss_grad(taps: list[TapPoint], normalize: bool = False) -> list[Tensor]:
    """Gradient of generalized_loss w.r.t. each student tap output."""
    if not taps:
        raise ArgumentError("need at least one tap point")
    grads = []
    for tap in taps:
        scale = 2.0 * tap.lam
        if normalize:
            scale /= tap.teacher_out.numel
        g = scale * (tap.student_out.data.astype(np.float64)
                     - tap.teacher_out.data.astype(np.float64))
        grads.append(Tensor(tap.student_out.shape, g.astype(np.float32)))
    return grads


# --- toy affine stacks ------------------------------------------------------

@dataclass
class AffineLayer:
    """y = weight @ x + bias, with weight (out, in) and bias (out,)."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError("affine layer needs weight (out,in) and bias (out,)")

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]


@dataclass
class ToyHead:
    """Stack of affine layers with tap points and an optional bottleneck.

    ``tap_indices`` are 0-based layer indices whose outputs are exposed for
    the mimic loss. The bottleneck layer, when set, must be strictly narrower
    than both neighbours.
    """

    layers: list[AffineLayer]
    tap_indices: tuple[int, ...]
    bottleneck_index: int | None = None

    def __post_init__(self):
        if not self.layers:
            raise ArgumentError("need at least one layer")
        self.tap_indices = tuple(self.tap_indices)
        for i in range(1, len(self.layers)):
            if self.layers[i].in_dim != self.layers[i - 1].out_dim:
                raise ShapeError(
                    f"layer {i} input dim {self.layers[i].in_dim} does not "
                    f"compose with layer {i - 1} output dim "
                    f"{self.layers[i - 1].out_dim}"
                )
        if not self.tap_indices:
            raise ArgumentError("need at least one tap index")
        for j in self.tap_indices:
            if not 0 <= j < len(self.layers):
                raise ArgumentError(f"tap index {j} out of range")
        b = self.bottleneck_index
        if b is not None:
            if not 0 <= b < len(self.layers):
                raise ArgumentError(f"bottleneck index {b} out of range")
            width = self.layers[b].out_dim
            before = self.layers[b].in_dim
            after = (self.layers[b + 1].out_dim
                     if b + 1 < len(self.layers) else None)
            if width >= before or (after is not None and width >= after):
                raise ShapeError(
                    f"bottleneck width {width} must be narrower than its "
                    f"neighbours ({before}, {after})"
                )

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def bottleneck_width(self) -> int | None:
        if self.bottleneck_index is None:
            return None
        return self.layers[self.bottleneck_index].out_dim

    def tap_dims(self) -> tuple[int, ...]:
        return tuple(self.layers[j].out_dim for j in self.tap_indices)

    def forward(self, x: np.ndarray) -> list[np.ndarray]:
        """All layer outputs for a batch ``x`` of shape (n, in_dim)."""
        h = np.asarray(x, dtype=np.float64)
        outs = []
        for layer in self.layers:
            h = h @ layer.weight.T + layer.bias
            outs.append(h)
        return outs

    def tap_outputs(self, x: np.ndarray) -> list[np.ndarray]:
        outs = self.forward(x)
        return [outs[j] for j in self.tap_indices]

    def copy(self) -> "ToyHead":
        return ToyHead(
            [AffineLayer(l.weight.copy(), l.bias.copy()) for l in self.layers],
            self.tap_indices,
            self.bottleneck_index,
        )

    @classmethod
    def random(cls, dims: list[int], tap_indices: tuple[int, ...],
               bottleneck_index: int | None, seed: int,
               scale: float = 0.5) -> "ToyHead":
        """Seeded Gaussian init for a stack with widths ``dims``."""
        rng = np.random.default_rng(seed)
        layers = []
        for i in range(len(dims) - 1):
            w = rng.normal(0.0, scale / np.sqrt(dims[i]), size=(dims[i + 1], dims[i]))
            layers.append(AffineLayer(w, np.zeros(dims[i + 1])))
        return cls(layers, tap_indices, bottleneck_index)


# --- training ---------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 4
    lr0: float = 1e-3
    lr_decay_factor: float = 0.1
    decay_epochs: tuple[int, ...] = (5, 15)
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ArgumentError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ArgumentError("batch_size must be >= 1")
        if self.lr0 <= 0:
            raise ArgumentError("lr0 must be > 0")
        if not 0 < self.lr_decay_factor <= 1:
            raise ArgumentError("lr_decay_factor must be in (0, 1]")
        object.__setattr__(self, "decay_epochs", tuple(self.decay_epochs))


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    mean_loss: float
    lr: float


def _as_data_matrix(dataset) -> np.ndarray:
    if isinstance(dataset, np.ndarray):
        x = np.asarray(dataset, dtype=np.float64)
        if x.ndim != 2:
            raise ShapeError("dataset array must be 2-D (samples, features)")
        return x
    rows = []
    for item in dataset:
        if isinstance(item, Tensor):
            rows.append(item.data.astype(np.float64))
        else:
            rows.append(np.asarray(item, dtype=np.float64).reshape(-1))
    if not rows:
        raise ArgumentError("dataset is empty")
    return np.stack(rows)


def _stack_loss_and_grads(student: ToyHead, xb: np.ndarray,
                          teacher_taps: list[np.ndarray],
                          lambdas: list[float],
                          normalize: bool) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Batch loss plus per-layer weight and bias gradients (backprop)."""
    outs = student.forward(xb)
    tap_pos = {j: k for k, j in enumerate(student.tap_indices)}

    loss = 0.0
    deltas: list[np.ndarray | None] = [None] * len(student.layers)
    for j, k in tap_pos.items():
        resid = outs[j] - teacher_taps[k]
        lam = lambdas[k]
        norm = resid.size if normalize else 1.0
        loss += lam * float(np.sum(resid * resid)) / norm
        deltas[j] = (2.0 * lam / norm) * resid

    grad_w = [np.zeros_like(l.weight) for l in student.layers]
    grad_b = [np.zeros_like(l.bias) for l in student.layers]
    acc = np.zeros_like(outs[-1])
    for l in range(len(student.layers) - 1, -1, -1):
        if deltas[l] is not None:
            acc = acc + deltas[l]
        h_prev = xb if l == 0 else outs[l - 1]
        grad_w[l] = acc.T @ h_prev
        grad_b[l] = acc.sum(axis=0)
        if l > 0:
            acc = acc @ student.layers[l].weight
    return loss, grad_w, grad_b


def train_toy(teacher: ToyHead, student: ToyHead, dataset,
              cfg: TrainConfig, lambdas: list[float] | None = None,
              normalize: bool = False) -> tuple[ToyHead, list[EpochStats]]:
    """Adam-train a student stack to mimic a frozen teacher at its taps.

    Batch losses are summed, not averaged, within a batch; the reported
    per-epoch value is the mean of those batch sums. Batches are taken in
    dataset order, so a run is fully determined by (student init, cfg).
    """
    if teacher.tap_dims() != student.tap_dims():
        raise ShapeError(
            f"tap misalignment: teacher dims {teacher.tap_dims()} vs "
            f"student dims {student.tap_dims()}"
        )
    if teacher.in_dim != student.in_dim:
        raise ShapeError("teacher and student input dims differ")
    if lambdas is None:
        lambdas = [1.0] * len(student.tap_indices)
    if len(lambdas) != len(student.tap_indices):
        raise ArgumentError("need one scale factor per tap")

    x = _as_data_matrix(dataset)
    student = student.copy()
    params = []
    for layer in student.layers:
        params.extend([layer.weight, layer.bias])
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]

    n = x.shape[0]
    batches = [x[i:i + cfg.batch_size] for i in range(0, n, cfg.batch_size)]
    teacher_taps = [teacher.tap_outputs(b) for b in batches]

    history = []
    lr = cfg.lr0
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        if epoch in cfg.decay_epochs:
            lr *= cfg.lr_decay_factor
        epoch_losses = []
        for bi, xb in enumerate(batches):
            loss, gw, gb = _stack_loss_and_grads(
                student, xb, teacher_taps[bi], lambdas, normalize)
            epoch_losses.append(loss)
            grads = []
            for w, b in zip(gw, gb):
                grads.extend([w, b])
            step += 1
            b1c = 1.0 - cfg.adam_beta1 ** step
            b2c = 1.0 - cfg.adam_beta2 ** step
            for p, g, mi, vi in zip(params, grads, m, v):
                mi *= cfg.adam_beta1
                mi += (1.0 - cfg.adam_beta1) * g
                vi *= cfg.adam_beta2
                vi += (1.0 - cfg.adam_beta2) * g * g
                p -= lr * (mi / b1c) / (np.sqrt(vi / b2c) + cfg.adam_eps)
        history.append(EpochStats(epoch, float(np.mean(epoch_losses)), lr))
    return student, history


def evaluate_loss(teacher: ToyHead, student: ToyHead, dataset,
                  lambdas: list[float] | None = None,
                  normalize: bool = False) -> float:
    """Generalized loss summed over the whole dataset as one batch."""
    if teacher.tap_dims() != student.tap_dims():
        raise ShapeError("tap misalignment between teacher and student")
    if lambdas is None:
        lambdas = [1.0] * len(student.tap_indices)
    x = _as_data_matrix(dataset)
    total = 0.0
    for lam, t_out, s_out in zip(lambdas, teacher.tap_outputs(x),
                                 student.tap_outputs(x)):
        resid = s_out - t_out
        norm = resid.size if normalize else 1.0
        total += lam * float(np.sum(resid * resid)) / norm
    return total


def write_history_csv(history: list[EpochStats], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mean_loss", "lr"])
        for row in history:
            writer.writerow([row.epoch, repr(row.mean_loss), repr(row.lr)])


# --- Eckart-Young verification oracle ---------------------------------------

def jacobi_singular_values(mat: np.ndarray, tol: float = 1e-12,
                           max_sweeps: int = 60) -> np.ndarray:
    """Singular values by one-sided Jacobi rotations (no LAPACK).

    Orthogonalizes columns pairwise until every pair is numerically
    orthogonal; the singular values are then the column norms.
    """
    a = np.asarray(mat, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError("need a 2-D matrix")
    if a.shape[0] < a.shape[1]:
        a = a.T
    a = a.copy()
    n = a.shape[1]
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                ap = a[:, p]
                aq = a[:, q]
                alpha = float(ap @ ap)
                beta = float(aq @ aq)
                gamma = float(ap @ aq)
                denom = np.sqrt(alpha * beta)
                if denom == 0.0 or abs(gamma) <= tol * denom:
                    continue
                off = max(off, abs(gamma) / denom)
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                new_p = c * ap - s * aq
                new_q = s * ap + c * aq
                a[:, p] = new_p
                a[:, q] = new_q
        if off <= tol:
            break
    sv = np.sqrt(np.sum(a * a, axis=0))
    sv.sort()
    return sv[::-1]


def eckart_young_bound(a: np.ndarray, x: np.ndarray, b: int) -> float:
    """Minimum of sum_x ||A x - S x||^2 over rank-b maps S.

    ``x`` holds one sample per row. The minimum equals the sum of squared
    singular values of A X^T beyond the first b.
    """
    if b < 0:
        raise ArgumentError("rank must be >= 0")
    a = np.asarray(a, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    g = a @ x.T
    sv = jacobi_singular_values(g)
    if b >= sv.size:
        return 0.0
    tail = sv[b:]
    return float(np.dot(tail, tail))


# --- named fixtures (used by the CLI and the acceptance suite) ---------------

@dataclass(frozen=True)
class LinearFixture:
    name: str
    teacher: ToyHead
    student: ToyHead
    data: np.ndarray
    cfg: TrainConfig
    teacher_matrix: np.ndarray  # single-tap teachers only


def _rank_limited_matrix(m: int, n: int, rank: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    p = rng.normal(size=(m, rank))
    q = rng.normal(size=(rank, n))
    return p @ q


def _single_tap_fixture(name: str, m: int, n: int, rank: int, width: int,
                        n_samples: int, base_seed: int, cfg: TrainConfig) -> LinearFixture:
    # Teacher matrix and dataset are fixed per fixture name so the oracle
    # bound is stable; cfg.seed varies only the student initialization.
    a = _rank_limited_matrix(m, n, rank, base_seed)
    teacher = ToyHead([AffineLayer(a, np.zeros(m))], tap_indices=(0,))
    student = ToyHead.random([n, width, m], tap_indices=(1,),
                             bottleneck_index=0, seed=base_seed * 1000 + cfg.seed)
    rng = np.random.default_rng(base_seed + 2)
    data = rng.normal(size=(n_samples, n))
    # Exactly centered samples make the student's trainable bias useless, so
    # its best reachable loss is the rank-limited linear floor of the oracle.
    data -= data.mean(axis=0)
    return LinearFixture(name, teacher, student, data, cfg, a)


# Late decay keeps full descent speed toward an exactly reachable zero;
# the rank-limited fixtures instead settle onto a positive floor, where an
# early decay stops Adam from creeping around it.
_CFG_FULL = TrainConfig(epochs=500, batch_size=8, lr0=0.02,
                        lr_decay_factor=0.2, decay_epochs=(250, 350, 450), seed=0)
_CFG_BNECK = TrainConfig(epochs=500, batch_size=8, lr0=0.02,
                         lr_decay_factor=0.2, decay_epochs=(60, 120, 200), seed=0)


def _build_fixture(name: str, cfg: TrainConfig) -> LinearFixture:
    if name == "rank2_full":
        # bottleneck width 3 >= teacher rank 2: achievable loss is zero
        return _single_tap_fixture(name, m=4, n=5, rank=2, width=3,
                                   n_samples=32, base_seed=11, cfg=cfg)
    if name == "rank3_bneck1":
        # width 1 < rank 3: converges to the Eckart-Young floor
        return _single_tap_fixture(name, m=5, n=6, rank=3, width=1,
                                   n_samples=32, base_seed=23, cfg=cfg)
    if name == "rank4_bneck2":
        return _single_tap_fixture(name, m=6, n=8, rank=4, width=2,
                                   n_samples=40, base_seed=37, cfg=cfg)
    raise ArgumentError(f"unknown fixture {name!r}; available: {fixture_names()}")


def fixture_names() -> list[str]:
    return ["rank2_full", "rank3_bneck1", "rank4_bneck2"]


def get_fixture(name: str, epochs: int | None = None,
                seed: int | None = None) -> LinearFixture:
    cfg = _CFG_FULL if name == "rank2_full" else _CFG_BNECK
    if epochs is not None:
        scale = epochs / cfg.epochs
        decay = tuple(d for d in (max(1, round(e * scale)) for e in cfg.decay_epochs)
                      if d <= epochs)
        cfg = replace(cfg, epochs=epochs, decay_epochs=decay)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    return _build_fixture(name, cfg)
