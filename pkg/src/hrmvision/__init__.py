"""hrmvision: a hierarchical two-timescale recurrent Transformer classifier
and a convolutional baseline, built on a self-contained reverse-mode
autodiff tensor core."""

from .blocks import (EncoderConfig, EncoderLayer, EncoderStack, OutputHead,
                     Tokenizer, encoder_block, geglu_ffn, mhsa, predictions,
                     rmsnorm, rope_apply)
from .cnn import CnnConfig, CnnModel
from .data import (Batch, Dataset, Standardizer, batches, load_cifar,
                   load_mnist, load_mnist_idx, standardize)
from .errors import (ConfigError, ContractError, DataError, DimensionError,
                     FormatError, NumericError)
from .experiment import (RunConfig, RunResult, default_config, emit_error_grid,
                         emit_metrics, evaluate_model, moving_average, run)
from .hrm import (HrmConfig, HrmModel, HrmState, SegmentOutput,
                  deep_supervised_step, evaluate, init_states)
from .modelio import (Checkpoint, load_checkpoint, param_count,
                      restore_parameters, save_checkpoint)
from .optim import (AdamW, ScheduleConfig, clip_global_norm,
                    label_smoothed_ce, lr_at)
from .tensor import (BatchNormState, GradTape, Tensor, add, batchnorm2d,
                     broadcast_to, concat, conv2d, gather_classes, gelu,
                     log_softmax, matmul, maxpool2d, mul, reduce_mean,
                     reduce_sum, relu, reshape, sigmoid, slice_, softmax,
                     stop_gradient, transpose, truncated_normal)

__version__ = "0.1.0"
