"""Dot-product attention, its linear-complexity reordering, and the tooling
to prove they match: equivalence checks, hand-derived gradients verified by
finite differences, and an analytical memory/computation model with runtime
instrumentation.
"""

from .errors import BudgetError, DimensionError, LinattError, NumericError, TensorFileError
from .grad import (
    GradCheckReport,
    backward_dot_product,
    backward_efficient,
    backward_module,
    check_mechanism_gradients,
    check_module_gradients,
    finite_difference,
)
from .instrument import Counters, track
from .mechanism import (
    Mechanism,
    Normalization,
    QkvTriple,
    dot_product_attention,
    effective_attention_matrix,
    efficient_attention,
    global_context,
    pairwise_similarity,
    softmax_approximation_gap,
    template_attention_maps,
)
from .module import (
    DEFAULT_BUDGET_BYTES,
    AttentionConfig,
    ModuleWeights,
    flatten,
    init_weights,
    module_forward,
    project,
    unflatten,
)
from .resource import (
    Comparison,
    CostQuery,
    Placement,
    ResourceEstimate,
    SweepRow,
    compare,
    estimate,
    measure,
    placement_presets,
    sweep,
)
from .tensor import (
    Rng,
    matmul,
    max_relative_difference,
    rand_tensor,
    scale,
    softmax_cols,
    softmax_rows,
    transpose,
)
from .tensorio import read_tensor, write_tensor

__all__ = [
    "AttentionConfig",
    "BudgetError",
    "Comparison",
    "CostQuery",
    "Counters",
    "DEFAULT_BUDGET_BYTES",
    "DimensionError",
    "GradCheckReport",
    "LinattError",
    "Mechanism",
    "ModuleWeights",
    "Normalization",
    "NumericError",
    "Placement",
    "QkvTriple",
    "ResourceEstimate",
    "Rng",
    "SweepRow",
    "TensorFileError",
    "backward_dot_product",
    "backward_efficient",
    "backward_module",
    "check_mechanism_gradients",
    "check_module_gradients",
    "compare",
    "dot_product_attention",
    "effective_attention_matrix",
    "efficient_attention",
    "estimate",
    "finite_difference",
    "flatten",
    "global_context",
    "init_weights",
    "matmul",
    "max_relative_difference",
    "measure",
    "module_forward",
    "pairwise_similarity",
    "placement_presets",
    "project",
    "rand_tensor",
    "read_tensor",
    "scale",
    "softmax_approximation_gap",
    "softmax_cols",
    "softmax_rows",
    "sweep",
    "template_attention_maps",
    "track",
    "transpose",
    "unflatten",
    "write_tensor",
]
