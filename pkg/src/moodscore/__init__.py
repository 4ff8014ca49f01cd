"""moodscore: affect-driven soundtrack token generation with hierarchical control."""

from .adapter import AdapterConfig, ControlAdapter, control_signal, interpolate_trajectory
from .anchor import AnchorEncoder, SemanticAnchor, conceptualize, encode_anchor
from .config import RunConfig, load_config
from .decoder import (
    AcousticDecoder,
    DecoderConfig,
    InjectionGates,
    SamplerConfig,
    gen_loss,
    pretrain_backbone,
    sample,
    train_adapter,
)
from .longform import (
    GenerationModels,
    LongformResult,
    WindowPlan,
    extract_trajectory_longform,
    generate_longform,
    plan_windows,
)
from .metrics import affect_alignment, frechet_distance, kld_score
from .probe import (
    FrozenBackbone,
    ProbeConfig,
    ProbeHead,
    build_interleaved_sequence,
    emo_loss,
    predict_trajectory,
    train_probe,
)
from .world import (
    AffectTrajectory,
    CodecSpec,
    NarrativeArc,
    PseudoVideo,
    TokenGrid,
    apply_delay,
    grammar_emit,
    make_arc,
    oracle_decode,
    remove_delay,
    render_pseudo_video,
    segment_clips,
    silence_filter,
)

__version__ = "0.1.0"
