"""Event-driven spiking convolutional networks trained with STDP and
target-timestamp threshold adaptation: encoder, simulator, trainer,
readout, linear-SVM evaluation and a CLI.
"""

from .core import RngStreams, Shape3, SpikeEvent, sort_events, sort_key, total_order
from .encoding import (
    CodingWindow,
    DoGParams,
    dog_filter,
    encode_image,
    encode_image_grid,
    encode_latency,
    gaussian_kernel,
    split_channels,
)
from .network import CONV, FC, POOL, LayerSpec, Network, NetworkSpec
from .plasticity import (
    AdditiveStdp,
    BiologicalStdp,
    MultiplicativeStdp,
    ThresholdParams,
    adapt_threshold_target,
    adapt_threshold_wta,
    apply_stdp,
    stdp_delta,
)
from .readout import (
    decode,
    decode_grid,
    extract_features,
    mean_sparsity,
    reconstruct_filter,
    sparsity,
    sum_pool,
)
from .simulate import (
    NO_INHIBITION,
    InhibitionPolicy,
    NeuronState,
    column_response,
    forward_times,
    integrate,
    pool_forward,
    reset_sample,
    run_sample,
)
from .svm import LinearModel, accuracy, fit, predict
from .training import (
    EnsembleMember,
    TrainConfig,
    TrainingLog,
    broadcast_column,
    encode_dataset,
    sample_patch,
    train_ensemble,
    train_layer,
    train_network,
)

__version__ = "0.1.0"
