"""Deterministic prompt-scheduling and embedding-guidance engine for
rare-concept image generation."""

__version__ = "0.1.0"

from .concepts import (  # noqa: F401
    ConceptPair,
    PromptPlan,
    bind_template,
    parse_prompt_sequence,
    plan_from_dict,
    reconstruct,
    trivial_plan,
)
from .embedding import (  # noqa: F401
    LsmParams,
    PemParams,
    cosine_similarity,
    gram_schmidt_combine,
    lsm_combine,
    lsm_orthogonalize,
    pem_combine,
    project_out,
    select_attribute_index,
    shift_factor,
)
from .scheduler import (  # noqa: F401
    ApsSession,
    NullSession,
    PromptChoice,
    R2fSession,
    SessionConfig,
    build_session,
    r2f_stop_points,
)
