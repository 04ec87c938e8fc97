"""Website fingerprinting of encrypted packet traces via time-series
similarity search: trace ingestion, multi-tab synthesis, prototype selection,
sliding distance measures, distance-feature classification, and in-trace
location of the matched website."""

__version__ = "0.1.0"

from .trace import (  # noqa: F401
    UNMONITORED,
    Direction,
    DirectionalSplit,
    PacketEvent,
    Trace,
    parse_trace,
    split_directions,
    to_signed_series,
)
from .dataset import (  # noqa: F401
    Dataset,
    MultiTabSample,
    SplitSpec,
    load_dataset,
    merge_traces,
    split_dataset,
    synthesize_multitab,
)
from .features import summary_features  # noqa: F401
from .prototypes import Prototype, Strategy, kmeans, pad_raw, select_prototypes  # noqa: F401
from .measures import (  # noqa: F401
    Measure,
    WeightScheme,
    WeightVector,
    cbd,
    dtw,
    euclidean,
    make_weights,
    sax_encode,
)
from .engine import (  # noqa: F401
    DistanceEngine,
    DistanceVector,
    compute_dist,
    sliding_min_euclidean,
    sliding_profile,
)
from .classifier import (  # noqa: F401
    GbdtHyperParams,
    build_feature_matrix,
    predict,
    train_gbdt,
    train_threshold,
)
from .locator import LocationResult, locate, location_accuracy  # noqa: F401
from .experiment import EvalReport, ExperimentConfig, run_experiment  # noqa: F401
