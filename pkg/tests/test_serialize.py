import json

import numpy as np
import pytest

from changesurface.errors import FormatError
from changesurface.grid import GridDataset
from changesurface.kernels import Rbf, SpectralMixture
from changesurface.model import ChangeSurfaceModel, predict
from changesurface.serialize import load_model, model_from_dict, model_to_dict, save_model
from changesurface.warp import ChangeSurface, PolyWeight, ZeroWeight, sample_rks_prior


@pytest.fixture
def model(rng):
    ws = (sample_rks_prior(5, [0.3, 0.3], 2.0, rng, origin=[0.5, 0.5]),
          PolyWeight(0.1, [[0.3, -0.2]]), ZeroWeight(2))
    ks = (SpectralMixture(rng.uniform(.1, 1, (2, 3)), rng.normal(size=(2, 3)), rng.uniform(.1, 1, (2, 3))),
          Rbf([0.2, 0.4], 1.3), Rbf([0.5, 0.1], 0.4))
    return ChangeSurfaceModel(ChangeSurface(ws), ks, 0.0123456789, y_offset=-0.37)


def test_round_trip_bit_for_bit(model, rng, tmp_path):
    data = GridDataset([np.linspace(0, 1, 5), np.linspace(0, 1, 4)], rng.normal(size=20))
    save_model(model, tmp_path / "m.json", {"note": "x"})
    back = load_model(tmp_path / "m.json")
    np.testing.assert_array_equal(back.pack(), model.pack())
    xs = rng.uniform(0, 1, (7, 2))
    np.testing.assert_array_equal(predict(back, data, xs), predict(model, data, xs))
    assert json.loads((tmp_path / "m.json").read_text())["meta"] == {"note": "x"}


def test_format_errors(model, tmp_path):
    doc = model_to_dict(model)
    with pytest.raises(FormatError):
        model_from_dict({**doc, "format": "other"})
    with pytest.raises(FormatError):
        model_from_dict({**doc, "version": 99})
    with pytest.raises(FormatError):
        model_from_dict({k: v for k, v in doc.items() if k != "kernels"})
    with pytest.raises(FormatError):
        model_from_dict({**doc, "regimes": 2})
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(FormatError):
        load_model(tmp_path / "bad.json")
