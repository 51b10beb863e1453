"""Multi-contrast MRI reconstruction with frequency/spatial dual-branch
feature extraction and cross-modal fusion, at desk scale."""

from .errors import CheckpointError, ConfigError, NumericError
from .fsfe import FSFE, BranchPair, FrequencyBranch, SpatialBranch
from .fusion import CMSFusion, FSFusion
from .kspace import (
    AmpPhase,
    SamplingMask,
    decompose,
    fft2c,
    ifft2c,
    make_mask,
    recompose,
    undersample,
    zero_fill,
)
from .losses import LossBreakdown, frequency_loss, pixel_loss, total_loss
from .metrics import psnr, ssim
from .model import (
    FSMNet,
    ModelConfig,
    ReconOutput,
    build_model,
    expected_param_count,
    load_checkpoint,
    save_checkpoint,
)
from .phantom import ContrastPair, generate_corpus, generate_pair, read_corpus, write_corpus
from .train import TrainConfig, TrainResult, dump_schedule, lr_at, train

__version__ = "0.1.0"
