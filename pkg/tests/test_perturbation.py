import numpy as np
import pytest

from susyfactor import pipeline
from susyfactor.dsl import eval_jet
from susyfactor.operator import expr_vector_jet
from susyfactor.perturbation import build_perturbation_gallery
from susyfactor.specfile import load_gallery
from susyfactor.susy import factorization_residual

OMEGA = [["0", "0.5"], ["-0.5", "0"]]
DW = "(x1^2 - 1)^2 + x2^2"
BOX = ((-2.0, 2.0), (-2.0, 2.0))


def build(alpha="bump(t, 0.2, 0.8)", **kw):
    args = dict(phi=DW, sigma=1.0, eps=0.2, alpha=alpha, theta=OMEGA, component_seed=[1.0, 0.0], box=BOX, grid=201)
    args.update(kw)
    return build_perturbation_gallery(**args)


def test_zero_profile():
    op, S, info = build(alpha="0")
    X = np.random.default_rng(0).uniform(-2, 2, (50, 2))
    assert not expr_vector_jet(op.bundle.U, X, 0.1, 0).val.any()
    assert not S.B(X, 0.1, 0).val.any()
    assert info.n_components == 2


def test_field_lives_on_one_well():
    op, S, info = build()
    X = np.random.default_rng(1).uniform(-2, 2, (400, 2))
    U = expr_vector_jet(op.bundle.U, X, 0.1, 0).val
    left = X[:, 0] < 0
    assert not U[left].any()
    assert np.abs(U[~left]).max() > 0
    assert info.mask(np.array([[1.0, 0.0], [-1.0, 0.0]])).tolist() == [1.0, 0.0]


def test_factorization():
    op, S, _ = build()
    X = pipeline.sample_grid(BOX, 15)
    for u in pipeline.random_test_functions(2, BOX, 2, 3):
        for h in (0.05, 0.2):
            assert np.max(np.abs(factorization_residual(op, S, h, u, X))) <= 1e-7


def test_support_violation():
    with pytest.raises(ValueError, match="support"):
        build(alpha="bump(t, 0.2, 0.9)")


def test_bad_seed():
    with pytest.raises(ValueError, match="seed"):
        build(component_seed=[0.0, 1.5])
    with pytest.raises(ValueError):
        build(eps=0.0)


def test_component_touching_the_box():
    with pytest.raises(ValueError, match="boundary"):
        build(sigma=3.0, alpha="bump(t, 0.2, 0.8)", box=((-1.5, 1.5), (-1.5, 1.5)))


def test_gallery_entry_builds():
    b = pipeline.build(load_gallery("perturbation-two-wells"))
    assert b.S is not None and b.op.n == 2
    assert eval_jet(b.op.phi, [[1.0, 0.0]], 0.1, 0).val[0] == 0.0
