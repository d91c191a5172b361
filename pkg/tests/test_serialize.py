import struct

import numpy as np
import pytest

from quadenhance.nn import ModelFormatError, dumps_model, init_params, load_model, loads_model, paired_generator, save_model


@pytest.fixture
def net(rng):
    spec = paired_generator(1, input_size=16)
    params = init_params(spec, rng)
    for v in params.values.values():
        v[...] = rng.standard_normal(v.shape)
    params.snap_float32()
    return spec, params


def test_roundtrip_exact(net, tmp_path):
    spec, params = net
    save_model(spec, params, tmp_path / "m.model")
    spec2, params2 = load_model(tmp_path / "m.model")
    assert spec2 == spec
    assert params2.digest() == params.digest()
    assert params2.training == params.training


def test_truncated(net):
    blob = dumps_model(*net)
    for cut in (3, 10, len(blob) // 2, len(blob) - 1):
        with pytest.raises(ModelFormatError):
            loads_model(blob[:cut])


def test_bad_magic_version_and_trailing(net):
    blob = dumps_model(*net)
    with pytest.raises(ModelFormatError, match="magic"):
        loads_model(b"XXXX" + blob[4:])
    with pytest.raises(ModelFormatError, match="version"):
        loads_model(blob[:4] + struct.pack("<I", 99) + blob[8:])
    with pytest.raises(ModelFormatError, match="trailing"):
        loads_model(blob + b"\0")


def test_resave_bytes_and_forward_identical(net, tmp_path, image):
    from quadenhance.model import Model, enhance

    spec, params = net
    params.training = False
    before = enhance(Model(spec, params), image)
    path = tmp_path / "m.model"
    save_model(spec, params, path)
    loaded = Model.load(path)
    assert dumps_model(loaded.spec, loaded.params) == path.read_bytes()
    assert np.array_equal(enhance(loaded, image), before)
