import itertools

import numpy as np
import pytest
from scipy.stats import chisquare

from bellsim import rng
from bellsim.exact import exact_report, state_weights
from bellsim.model import (SETTING_PAIRS, ModelError, evaluate_outcomes, gallery_model,
                           gallery_names, loads_model, sample_states, sample_trial_state,
                           to_model3, validate_model)

from conftest import N_BIG, make_model

PERFECT = """
name = "p"
variant = "model1"
[support]
lambda1 = 2
lambda2 = 2
lambdax = 1
lambday = 1
[source]
p = [[0.5, 0.0], [0.0, 0.5]]
[instruments]
px1 = [1.0]
px2 = [1.0]
py1 = [1.0]
py2 = [1.0]
[responses]
A1 = [[-1], [1]]
A2 = [[-1], [1]]
B1 = [[-1], [1]]
B2 = [[-1], [1]]
"""


def singlet_style():
    return make_model([[0.5, 0], [0, 0.5]], [[[-1], [1]]] * 2, [[[1], [-1]]] * 2)


def test_well_formed_model_is_ok():
    assert validate_model(singlet_style()).ok


def test_unnormalized_source_reported():
    m = make_model([[0.5, 0], [0, 0.499]], [[[-1], [1]]] * 2, [[[1], [-1]]] * 2)
    report = validate_model(m)
    assert not report.ok
    assert any("source not normalized" in v for v in report.violations)


def test_model3_zero_outcome_reported():
    pxy = np.ones((2, 2, 1, 1))
    m = make_model([[1.0]], [[[0]], [[1]]], [[[1]], [[1]]], pxy=pxy)
    report = validate_model(m)
    assert any("CbD outcomes must be ±1" in v for v in report.violations)


def test_out_of_range_response_reported():
    m = make_model([[1.0]], [[[2]], [[1]]], [[[1]], [[1]]])
    assert any("outside" in v for v in validate_model(m).violations)


def test_validate_never_raises_on_bad_shapes():
    m = make_model([[0.5, 0.5]], [[[1]], [[1]]], [[[1]], [[1]]])
    assert not validate_model(m).ok


def test_point_mass_sampling_is_unique_state():
    source = np.zeros((2, 3))
    source[1, 2] = 1
    px = np.array([[0, 1.0], [0, 1.0]])
    py = np.array([[1.0, 0], [1.0, 0]])
    m = make_model(source, np.ones((2, 2, 2)), np.ones((2, 3, 2)), px=px, py=py)
    g = rng.generator(5, 0)
    for _ in range(50):
        assert sample_trial_state(m, (1, 2), g) == (1, 2, 1, 0)


def test_uniform_instrument_frequency():
    m = make_model([[1.0]], np.ones((2, 1, 2)), np.ones((2, 1, 2)))
    n = N_BIG
    x = np.ones(n, dtype=int)
    _, _, lx, _ = sample_states(m, x, x, rng.uniforms(1, 0, 0, n), rng.uniforms(1, 1, 0, n),
                                rng.uniforms(1, 2, 0, n))
    assert abs(np.mean(lx == 0) - 0.5) < 0.002


def test_model3_correlated_support_respected():
    pxy = np.zeros((2, 2, 3, 3))
    for i in range(3):
        pxy[:, :, i, i] = 1 / 3
    m = make_model([[1.0]], np.ones((2, 1, 3)), np.ones((2, 1, 3)), pxy=pxy)
    g = rng.generator(3, 0)
    for s in SETTING_PAIRS:
        for _ in range(200):
            _, _, lx, ly = sample_trial_state(m, s, g)
            assert lx == ly


def test_evaluate_outcomes_lookup():
    const = make_model([[1.0]], np.ones((2, 1, 1)), np.ones((2, 1, 1)))
    assert evaluate_outcomes(const, (0, 0, 0, 0), (2, 1))[0] == 1
    m = singlet_style()
    assert evaluate_outcomes(m, (0, 0, 0, 0), (1, 1))[0] == -1
    gated = make_model([[1.0]], [[[0, 1]], [[0, 1]]], np.ones((2, 1, 1)))
    assert evaluate_outcomes(gated, (0, 0, 0, 0), (1, 1)) == (0, 1)


def test_evaluate_out_of_range_aborts():
    with pytest.raises(IndexError):
        evaluate_outcomes(singlet_style(), (5, 0, 0, 0), (1, 1))


@pytest.mark.parametrize("name", gallery_names())
def test_causal_locality_sweep(name):
    m = gallery_model(name)
    s = m.support
    for l1, lx, x in itertools.product(range(s.n_lambda1), range(s.n_lambdax), (1, 2)):
        seen = {evaluate_outcomes(m, (l1, l2, lx, ly), (x, y))[0]
                for l2 in range(s.n_lambda2) for ly in range(s.n_lambday) for y in (1, 2)}
        assert len(seen) == 1
    for l2, ly, y in itertools.product(range(s.n_lambda2), range(s.n_lambday), (1, 2)):
        seen = {evaluate_outcomes(m, (l1, l2, lx, ly), (x, y))[1]
                for l1 in range(s.n_lambda1) for lx in range(s.n_lambdax) for x in (1, 2)}
        assert len(seen) == 1


@pytest.mark.parametrize("name", gallery_names())
def test_model1_embedding_gives_identical_expectations(name):
    m = gallery_model(name)
    e1, e3 = exact_report(m), exact_report(to_model3(m))
    for s in SETTING_PAIRS:
        np.testing.assert_allclose(e1[s].joint, e3[s].joint, atol=1e-12, rtol=0)


@pytest.mark.slow
@pytest.mark.parametrize("name", gallery_names())
def test_sampling_chi_square(name):
    m = gallery_model(name)
    n = N_BIG
    for i, (x, y) in enumerate(SETTING_PAIRS):
        xs = np.full(n, x)
        ys = np.full(n, y)
        l1, l2, lx, ly = sample_states(m, xs, ys, rng.uniforms(9, 1, i, n), rng.uniforms(9, 2, i, n),
                                       rng.uniforms(9, 3, i, n))
        s = m.support
        flat = np.ravel_multi_index((l1, l2, lx, ly), (s.n_lambda1, s.n_lambda2, s.n_lambdax, s.n_lambday))
        w = state_weights(m, x, y).ravel()
        counts = np.bincount(flat, minlength=w.size)
        assert counts[w == 0].sum() == 0
        pos = w > 0
        if pos.sum() < 2:
            continue
        expected = w[pos] / w[pos].sum() * n
        assert chisquare(counts[pos], expected).pvalue > 0.001


def test_loader_accepts_fraction_strings_and_rejects_unknown_fields():
    m = loads_model(PERFECT.replace("p = [[0.5, 0.0], [0.0, 0.5]]", 'p = [["1/2", 0.0], [0.0, "1/2"]]'))
    assert m.source[0, 0] == 0.5
    with pytest.raises(ModelError, match="unknown"):
        loads_model(PERFECT + "extra = 1\n")
    with pytest.raises(ModelError, match="unknown"):
        loads_model(PERFECT.replace("lambday = 1", "lambday = 1\nlambdaz = 2"))


def test_loader_rejects_unnormalized_without_renormalizing():
    with pytest.raises(ModelError, match="not normalized"):
        loads_model(PERFECT.replace("p = [[0.5, 0.0], [0.0, 0.5]]", "p = [[0.5, 0.0], [0.0, 0.499]]"))


def test_loader_rejects_zero_in_model3():
    text = PERFECT.replace('"model1"', '"model3"').replace(
        "px1 = [1.0]\npx2 = [1.0]\npy1 = [1.0]\npy2 = [1.0]",
        "p11 = [[1.0]]\np12 = [[1.0]]\np21 = [[1.0]]\np22 = [[1.0]]").replace("A1 = [[-1], [1]]", "A1 = [[0], [1]]")
    with pytest.raises(ModelError, match="±1"):
        loads_model(text)


def test_model_arrays_are_immutable():
    m = gallery_model("perfect_corr")
    with pytest.raises(ValueError):
        m.source[0, 0] = 1.0
