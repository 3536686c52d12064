"""From-scratch CNN training and int8 inference for dragon-fruit quality grading."""

from .errors import (
    BadMagicError,
    ChecksumError,
    ConfigError,
    DecodeError,
    DivergenceError,
    IngestionError,
    ModelFormatError,
    ShapeError,
    StateError,
    TruncatedFileError,
    VersionError,
)
from .network import (
    CLASS_NAMES,
    INPUT_SHAPE,
    NUM_CLASSES,
    ClassLabel,
    LayerSpec,
    Mode,
    Network,
    backward,
    build_from_specs,
    build_network,
    canonical_layer_specs,
    forward,
    forward_train,
    layer_param_counts,
    shape_trace,
    total_parameters,
)
from .data import (
    AugmentConfig,
    Dataset,
    Sample,
    Split,
    augment,
    batch_iterator,
    decode_and_resize,
    load_dataset,
    normalize,
    one_hot,
    synth_dataset,
    write_dataset,
)
from .training import (
    AdamState,
    EpochRecord,
    TrainConfig,
    adam_step,
    evaluate,
    flatten_params,
    train,
)
from .metrics import (
    ClassReport,
    ConfusionMatrix,
    compute_report,
    confusion_matrix,
    one_vs_rest,
    render_text,
    report_to_dict,
)

__version__ = "0.1.0"
