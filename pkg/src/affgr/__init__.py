"""Deterministic toolkit for verifiable-reward scoring, group-relative policy
optimization math, affordance-mask dataset preparation, segmentation metrics,
and 3-D grasp selection."""

from .schema import (
    Box2D,
    Point2D,
    RawRollout,
    StructuredAnswer,
    ThinkAnswerPair,
    parse_structured_answer,
    parse_think_answer,
    serialize_structured_answer,
)
from .rewards import (
    GroundTruthTarget,
    PredictionSet,
    RewardBreakdown,
    RewardConfig,
    accuracy_reward,
    box_iou,
    match_boxes,
    non_repeat_reward,
    score_rollout,
)
from .grpo import (
    GrpoConfig,
    LowRankAdapter,
    RolloutRecord,
    TokenSequenceLikelihood,
    clipped_term,
    group_advantages,
    grpo_objective,
    kl_penalty,
    lowrank_apply,
    sft_nll,
)
from .masks import AffordanceMask, mask_iou
from .dataprep import (
    CoTRecord,
    PromptPair,
    SegmenterOracle,
    inscribed_circle_center,
    make_prompt_pair,
    mask_to_bbox,
    self_consistency_gate,
    validate_cot_record,
)
from .metrics import EvalPair, c_iou, g_iou, subset_report
from .graspgeom import (
    CameraModel,
    DepthFrame,
    GraspCandidate,
    GraspSelectConfig,
    OrientedBox,
    ScenePointCloud,
    TargetSubCloud,
    back_project,
    box_overlap_volume,
    closing_volume,
    collision_check,
    extract_subcloud,
    grasp_nms,
    grasp_target_iou,
    select_grasps,
)

__version__ = "0.1.0"
