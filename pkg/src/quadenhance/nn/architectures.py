"""Default generator and discriminator layouts."""
from __future__ import annotations

from .layers import avgpool_global, batchnorm, conv2d, dropout, leaky_relu, linear
from .network import NetworkSpec

SLOPE = 0.2


def _conv_stack(channels, kernel=3):
    layers = []
    cin = 3
    for cout in channels:
        layers += [conv2d(cin, cout, kernel=kernel, stride=2, padding=1), batchnorm(cout), leaky_relu(SLOPE)]
        cin = cout
    return layers


def paired_generator(branches: int = 5, input_size: int = 256, p_drop: float = 0.5,
                     channels=(16, 32, 64)) -> NetworkSpec:
    """Multi-branch coefficient predictor; each branch ends in a 32-d feature."""
    branch = _conv_stack(channels) + [
        avgpool_global(),
        linear(channels[-1], 64),
        dropout(p_drop),
        linear(64, 32),
    ]
    head = [linear(32 * branches, 30, zero_init=True)]
    return NetworkSpec(f"paired_generator_{branches}b", branches, branch, head, input_size)


def unpaired_generator(input_size: int = 256, p_drop: float = 0.0,
                       channels=(16, 32, 64, 128, 256)) -> NetworkSpec:
    """Deeper single-branch predictor used by both unpaired generators.

    The dropout layer sits between the two linear layers; phase 1 runs it at
    rate 0.
    """
    branch = _conv_stack(channels) + [
        avgpool_global(),
        linear(channels[-1], 64),
        dropout(p_drop),
    ]
    head = [linear(64, 30, zero_init=True)]
    return NetworkSpec("unpaired_generator", 1, branch, head, input_size)


def discriminator(input_size: int = 256, p_drop: float = 0.12, channels=(32, 64, 128, 256)) -> NetworkSpec:
    layers = []
    cin = 3
    size = input_size
    for cout in channels:
        layers += [conv2d(cin, cout, kernel=4, stride=2, padding=1), batchnorm(cout),
                   leaky_relu(SLOPE), dropout(p_drop)]
        cin = cout
        size = (size + 2 - 4) // 2 + 1
    # the final linear flattens the C x h x w feature map
    head = [linear(cin * size * size, 1)]
    return NetworkSpec("discriminator", 1, layers, head, input_size, output_shape=(1,))


def shared_param_keys(spec: NetworkSpec):
    """Registry keys of the feature extractor (convolution weights and biases)."""
    return [f"{path}.{name}" for path, layer in spec.layer_paths() if layer.kind == "conv2d"
            for name in ("weight", "bias")]
