"""kernsym: dihedral symmetry analysis of convolutional weight kernels.

Quantifies how symmetric each layer's mean kernel is under the eight
symmetries of the square, lints the padding-consumption arithmetic that
makes strided layers train asymmetric kernels, and evaluates the
flip/shift consistency such symmetry buys, all on an exact float64
reference engine.
"""

from . import errors
from .consistency import (
    ConsistencyReport,
    flip_consistency,
    flip_h,
    miou,
    predict_segmentation,
    shift_consistency,
)
from .convarith import (
    ConvLayerSpec,
    PaddingConsumption,
    is_uneven,
    output_size,
    padding_consumption,
    propagate_and_lint,
    suggest_input_size,
)
from .dihedral import D4Element, apply, compose, inverse, non_identity_set
from .emergence import (
    SymmetryTrace,
    TrainConfig,
    gen_blur_task,
    gen_edge_task,
    kaiming_init,
    train,
)
from .engine import Model, conv2d_forward, mse_loss, pool_forward, softmax_cross_entropy
from .manifest import ModelManifest, parse_manifest
from .safetensors_io import (
    TensorStore,
    parse_safetensors,
    read_safetensors_file,
    write_safetensors,
    write_safetensors_file,
)
from .symmetry import (
    SymmetryProfile,
    SymmetryScore,
    expected_init_symmetry,
    model_symmetry_profile,
    symmetry_score,
)
from .tensors import check_kernel, check_tensor4, frobenius_norm, mean_kernel, normalize

__version__ = "0.1.0"
