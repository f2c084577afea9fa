"""Closed-form backward passes and finite-difference verification.

The loss convention throughout is L = <upstream, output> (elementwise inner
product), so gradients are exactly the adjoints of the forward maps. The
backward passes are hand-derived rather than taped: the graphs are small and
fixed, and the efficient mechanism's backward stays free of n x n
intermediates this way.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .mechanism import Mechanism, Normalization, QkvTriple
from .module import AttentionConfig, ModuleWeights, _check_consistency, flatten
from .tensor import softmax_cols, softmax_rows

# Floor for relative-error denominators so near-zero gradients do not blow up.
REL_ERROR_FLOOR = 1e-8
DEFAULT_STEP = 1e-5


def _softmax_rows_backward(p, dp):
    # p = softmax_rows(x); Jacobian applied row-wise without forming it
    return p * (dp - (dp * p).sum(axis=1, keepdims=True))


def _softmax_cols_backward(p, dp):
    return p * (dp - (dp * p).sum(axis=0, keepdims=True))


def backward_dot_product(t: QkvTriple, norm: Normalization, upstream):
    """Gradients (dQ, dK, dV) of <upstream, rho(Q K^T) V>."""
    upstream = _check_upstream(t, upstream)
    n = t.n
    s = t.q @ t.k.T
    if norm is Normalization.SCALING:
        a = s / n
        dv = a.T @ upstream
        ds = (upstream @ t.v.T) / n
    else:
        p = softmax_rows(s)
        dv = p.T @ upstream
        ds = _softmax_rows_backward(p, upstream @ t.v.T)
    dq = ds @ t.k
    dk = ds.T @ t.q
    return dq, dk, dv


def backward_efficient(t: QkvTriple, norm: Normalization, upstream):
    """Gradients (dQ, dK, dV) of <upstream, rho_q(Q)(rho_k(K)^T V)>.

    Every intermediate is n x d_k, n x d_v, or d_k x d_v; like the forward
    pass, nothing quadratic in n is materialized.
    """
    upstream = _check_upstream(t, upstream)
    if norm is Normalization.SCALING:
        f = 1.0 / np.sqrt(t.n)
        qn = t.q * f
        kn = t.k * f
        g = kn.T @ t.v
        dg = qn.T @ upstream
        dq = (upstream @ g.T) * f
        dk = (t.v @ dg.T) * f
        dv = kn @ dg
    else:
        qn = softmax_rows(t.q)
        kn = softmax_cols(t.k)
        g = kn.T @ t.v
        dg = qn.T @ upstream
        dq = _softmax_rows_backward(qn, upstream @ g.T)
        dk = _softmax_cols_backward(kn, t.v @ dg.T)
        dv = kn @ dg
    return dq, dk, dv


def backward_module(x, w: ModuleWeights, cfg: AttentionConfig, upstream):
    """Gradients of <upstream, module_forward(x)> w.r.t. the input and weights.

    Returns (dx, dw_q, dw_k, dw_v, dw_o); dw_o is None when reprojection does
    not apply. The residual path contributes the identity to dx.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    upstream = np.ascontiguousarray(upstream, dtype=np.float64)
    if upstream.shape != x.shape:
        raise DimensionError(f"upstream shape {upstream.shape} != input shape {x.shape}")
    d = x.shape[-1]
    use_o = _check_consistency(d, w, cfg)

    x_flat = flatten(x)
    t = QkvTriple(x_flat @ w.w_q, x_flat @ w.w_k, x_flat @ w.w_v)
    u_flat = upstream.reshape(x_flat.shape)

    backward = (
        backward_dot_product if cfg.mechanism is Mechanism.DOT_PRODUCT else backward_efficient
    )
    if use_o:
        if cfg.mechanism is Mechanism.DOT_PRODUCT:
            attended = _dp_forward(t, cfg.norm)
        else:
            attended = _eff_forward(t, cfg.norm)
        dw_o = attended.T @ u_flat
        d_attended = u_flat @ w.w_o.T
    else:
        dw_o = None
        d_attended = u_flat

    dq, dk, dv = backward(t, cfg.norm, d_attended)
    dw_q = x_flat.T @ dq
    dw_k = x_flat.T @ dk
    dw_v = x_flat.T @ dv
    dx_flat = u_flat + dq @ w.w_q.T + dk @ w.w_k.T + dv @ w.w_v.T
    return dx_flat.reshape(x.shape), dw_q, dw_k, dw_v, dw_o


def _dp_forward(t, norm):
    s = t.q @ t.k.T
    s = s / t.n if norm is Normalization.SCALING else softmax_rows(s)
    return s @ t.v


def _eff_forward(t, norm):
    if norm is Normalization.SCALING:
        qn, kn = t.q / np.sqrt(t.n), t.k / np.sqrt(t.n)
    else:
        qn, kn = softmax_rows(t.q), softmax_cols(t.k)
    return qn @ (kn.T @ t.v)


def _check_upstream(t, upstream):
    upstream = np.ascontiguousarray(upstream, dtype=np.float64)
    if upstream.shape != (t.n, t.d_v):
        raise DimensionError(
            f"upstream shape {upstream.shape} != output shape {(t.n, t.d_v)}"
        )
    return upstream


def finite_difference(f, at, h: float = DEFAULT_STEP) -> np.ndarray:
    """Central-difference gradient of a scalar function, one coordinate at a time."""
    if h <= 0:
        raise ValueError(f"step size must be positive, got {h}")
    at = np.array(at, dtype=np.float64)  # private copy; the caller's array stays intact
    grad = np.zeros_like(at)
    flat = at.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f(at)
        flat[i] = orig - h
        down = f(at)
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def relative_error(analytic, numeric) -> tuple[float, float]:
    """(max relative, max absolute) elementwise error between two gradients."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), REL_ERROR_FLOOR)
    abs_err = np.abs(analytic - numeric)
    return float((abs_err / denom).max()), float(abs_err.max())


@dataclass(frozen=True)
class GradCheckReport:
    """Analytic-vs-numeric agreement for one configuration."""

    label: str
    max_rel_error: dict
    max_abs_error: dict
    h: float
    tolerance: float
    passed: bool


def _build_report(label, pairs, h, tolerance):
    rel, abs_ = {}, {}
    for name, analytic, numeric in pairs:
        rel[name], abs_[name] = relative_error(analytic, numeric)
    passed = max(rel.values()) <= tolerance
    return GradCheckReport(
        label=label, max_rel_error=rel, max_abs_error=abs_, h=h,
        tolerance=tolerance, passed=passed,
    )


def check_mechanism_gradients(
    t: QkvTriple,
    norm: Normalization,
    mechanism: Mechanism,
    upstream,
    h: float = DEFAULT_STEP,
    tolerance: float = 1e-5,
) -> GradCheckReport:
    """Compare a mechanism's analytic gradients against central differences."""
    upstream = _check_upstream(t, upstream)
    forward = _dp_forward if mechanism is Mechanism.DOT_PRODUCT else _eff_forward
    backward = (
        backward_dot_product if mechanism is Mechanism.DOT_PRODUCT else backward_efficient
    )
    dq, dk, dv = backward(t, norm, upstream)

    def loss(q=None, k=None, v=None):
        trial = QkvTriple(
            t.q if q is None else q,
            t.k if k is None else k,
            t.v if v is None else v,
        )
        return float((upstream * forward(trial, norm)).sum())

    pairs = [
        ("dQ", dq, finite_difference(lambda q: loss(q=q), t.q, h)),
        ("dK", dk, finite_difference(lambda k: loss(k=k), t.k, h)),
        ("dV", dv, finite_difference(lambda v: loss(v=v), t.v, h)),
    ]
    label = f"{mechanism.value}/{norm.value}"
    return _build_report(label, pairs, h, tolerance)


def check_module_gradients(
    x,
    w: ModuleWeights,
    cfg: AttentionConfig,
    upstream,
    h: float = DEFAULT_STEP,
    tolerance: float = 1e-5,
) -> GradCheckReport:
    """Compare the full module's analytic gradients against central differences."""
    from .module import module_forward

    x = np.ascontiguousarray(x, dtype=np.float64)
    upstream = np.ascontiguousarray(upstream, dtype=np.float64)
    dx, dw_q, dw_k, dw_v, dw_o = backward_module(x, w, cfg, upstream)

    def loss_with(x_=None, **repl):
        weights = ModuleWeights(
            w_q=repl.get("w_q", w.w_q),
            w_k=repl.get("w_k", w.w_k),
            w_v=repl.get("w_v", w.w_v),
            w_o=repl.get("w_o", w.w_o),
        )
        inp = x if x_ is None else x_
        return float((upstream * module_forward(inp, weights, cfg)).sum())

    pairs = [
        ("dx", dx, finite_difference(lambda a: loss_with(x_=a), x, h)),
        ("dW_q", dw_q, finite_difference(lambda a: loss_with(w_q=a), w.w_q, h)),
        ("dW_k", dw_k, finite_difference(lambda a: loss_with(w_k=a), w.w_k, h)),
        ("dW_v", dw_v, finite_difference(lambda a: loss_with(w_v=a), w.w_v, h)),
    ]
    if dw_o is not None:
        pairs.append(("dW_o", dw_o, finite_difference(lambda a: loss_with(w_o=a), w.w_o, h)))
    label = f"module/{cfg.mechanism.value}/{cfg.norm.value}"
    return _build_report(label, pairs, h, tolerance)
