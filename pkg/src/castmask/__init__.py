"""castmask: cross-attention mask/bias recipes for multi-person scene scripts.

Compile a structured scene script (who does what, when, toward whom, with
first-frame boxes) into a block-sparse cross-attention mask and directional
bias, apply it in an exact masked-softmax kernel, and evaluate generated
clips with binary VQA majority voting.
"""

from .attention import (
    DEFAULT_D_MODEL,
    DEFAULT_GAMMA,
    GAMMA_SWEEP,
    MASKED,
    AttentionResult,
    MaskRecipe,
    bias_entry,
    build_recipe,
    directional_mass,
    mask_entry,
    masked_attention,
    materialize_block,
    plain_attention,
)
from .categories import DEFAULT_CATEGORIES, ActionCategory, categorize_action
from .errors import (
    ArtifactError,
    CastmaskError,
    DegenerateRegionError,
    SceneSpecError,
    TransportError,
    UncategorizedActionError,
)
from .evaluation import (
    AnnotationSet,
    ClipAnnotation,
    MetricReport,
    Overlay,
    Query,
    VoteRecord,
    aggregate_runs,
    compute_metrics,
    generate_action_queries,
    generate_queries,
    generate_stillness_queries,
    generate_target_queries,
    majority_vote,
    parse_annotations,
    trim_window,
)
from .geometry import (
    DEFAULT_EXPANSION_RATIO,
    DEFAULT_SPATIAL_FACTOR,
    DEFAULT_TEMPORAL_FACTOR,
    EventRegion,
    LatentGrid,
    box_to_spatial_cells,
    build_grid,
    event_region,
    expand_box,
    window_to_latent_frames,
)
from .harness import (
    DeterministicStream,
    LeakReport,
    ToyModel,
    init_toy_model,
    instance_embeddings,
    isolation_probe,
    leakage_report,
    run_stack,
)
from .oracle import (
    OracleAnswer,
    OracleEndpoint,
    ask,
    parse_answer,
    resolve_unparseable,
    run_queries,
)
from .pipeline import CompiledScene, build_regions, compile_scene
from .prompt import (
    Direction,
    PromptLayout,
    Segment,
    SegmentKind,
    TokenSpanMap,
    derive_direction,
    map_spans_to_tokens,
    positional_descriptor,
    serialize_prompt,
)
from .scene import (
    STILLNESS_EVENT_ID,
    BoundingBox,
    PersonRef,
    SceneSpec,
    SocialEvent,
    TimeWindow,
    format_scene_spec,
    load_scene_spec,
    parse_scene_spec,
    stillness_events,
)
from .tokenizer import MockTokenizer, Token, Tokenizer

__version__ = "0.1.0"
