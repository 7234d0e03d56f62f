import json
import math

import pytest

covbound = pytest.importorskip("covbound")
np = pytest.importorskip("numpy")


def test_identity_closed_forms():
    m = covbound.model({"spectrum": {"kind": "identity", "d": 1}})
    assert m.dimension == 1
    er = covbound.effective_rank(m)
    assert er["closed_form"]
    assert er["r"] == pytest.approx(2 / math.pi, rel=1e-12)
    assert er["r_tilde"] == pytest.approx(1.0)


def test_model_properties():
    m = covbound.model({"spectrum": {"kind": "spiked", "d": 5, "k": 2, "strength": 3.0}})
    cov = np.asarray(m.covariance)
    assert cov.shape == (5, 5)
    assert np.allclose(cov, cov.T)
    assert m.trace == pytest.approx(np.trace(cov))
    assert json.loads(m.to_json())["spectrum"]["kind"] == "spiked"


def test_operator_norm_matches_numpy():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((6, 6))
    s = a @ a.T
    value, method = covbound.operator_norm(s, "euclidean")
    assert value == pytest.approx(np.linalg.eigvalsh(s).max(), rel=1e-12)
    assert isinstance(method, str)
    sup, _ = covbound.operator_norm(s, "sup_norm")
    assert sup == pytest.approx(np.abs(s).max())


def test_bound_helpers():
    assert covbound.fixed_point_delta(1.0, 1.0) == pytest.approx((1 + math.sqrt(5)) ** 2 / 4)
    value, regime = covbound.eval_bound("expectation_upper", {"op_norm": 1.0, "r": 10.0, "n": 1000.0}, 1.0)
    assert value == pytest.approx(0.1)
    assert regime == "r_le_n"


def test_sampling_is_deterministic():
    m = covbound.model({"spectrum": {"kind": "identity", "d": 3}})
    a = np.asarray(covbound.sample(m, 50, 7))
    b = np.asarray(covbound.sample(m, 50, 7))
    c = np.asarray(covbound.sample(m, 50, 8))
    assert a.shape == (50, 3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_errors_map_to_python_exceptions():
    with pytest.raises(covbound.ConfigError):
        covbound.model({"spectrum": {"kind": "identity"}})
    with pytest.raises(ValueError):
        covbound.model({"spectrum": {"kind": "nope", "d": 2}})


def test_run_cli_in_process():
    code, out, _ = covbound.run_cli(["bound", "--theorem", "fixed_point", "--a", "1", "--b", "1"])
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(2.618033988749895)
    code, _, err = covbound.run_cli(["bound", "--theorem", "expectation_upper"])
    assert code == 2
    assert err
