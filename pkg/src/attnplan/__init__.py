"""Post-training attention compression for a toy diffusion transformer.

Window attention with cached residuals, attention-output reuse across
denoising steps and across the two guidance branches, a greedy calibration
search that assigns one strategy per (step, layer), and an analytic
attention-FLOPs cost model.
"""

__version__ = "0.1.0"

from .attention import AttentionConfig, QKV, band_sizes, default_window, full_attention, window_attention
from .cost_model import CostEntry, CostReport, aggregate, attn_flops, baseline_flops, full_attn_flops, window_attn_flops
from .errors import (
    CacheMissError,
    ConfigError,
    MaskError,
    OrderingError,
    PlanError,
    ShapeError,
    SimilarityError,
)
from .metrics import CFG_WISE, STEP_WISE, SimilarityMatrix, cosine_similarity, mrae, similarity_report
from .model import (
    ModelConfig,
    RunRecorder,
    StepTrace,
    ToyDiT,
    guided_eps,
    initial_latent,
    sample,
    step_eps,
)
from .numerics import Rng, gelu, layer_norm, matmul, row_softmax
from .plan_search import CompressionPlan, SearchConfig, save_heatmap_csv, search, validate_plan
from .sharing import (
    BRANCHES,
    COND,
    SEARCH_ORDER,
    UNCOND,
    CacheState,
    Strategy,
    asc_reuse,
    asc_store,
    ast_reuse,
    ast_store,
    wars_refresh,
    wars_reuse,
)
