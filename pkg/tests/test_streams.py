import numpy as np
import pytest

from randmisfit import derive_stream


def test_same_path_reproduces_draws():
    a = derive_stream(123, ["family", "omega", 0]).random(1000)
    b = derive_stream(123, ["family", "omega", 0]).random(1000)
    assert np.array_equal(a, b)


def test_adjacent_omega_streams_look_independent():
    x = derive_stream(9, ["omega", 3]).standard_normal(10_000)
    y = derive_stream(9, ["omega", 4]).standard_normal(10_000)
    rho = np.corrcoef(x, y)[0, 1]
    assert abs(rho) < 0.05


def test_distinct_paths_and_seeds_differ():
    base = derive_stream(1, ["a"]).random(64)
    assert not np.array_equal(base, derive_stream(2, ["a"]).random(64))
    assert not np.array_equal(base, derive_stream(1, ["b"]).random(64))
    # concatenation ambiguity must not collide
    ab_c = derive_stream(1, ["ab", "c"]).random(64)
    a_bc = derive_stream(1, ["a", "bc"]).random(64)
    assert not np.array_equal(ab_c, a_bc)
    # int labels are distinct from their string spellings
    assert not np.array_equal(
        derive_stream(1, [3]).random(64), derive_stream(1, ["3"]).random(64)
    )


def test_label_validation():
    with pytest.raises(ValueError):
        derive_stream(0, [])
    with pytest.raises(TypeError):
        derive_stream(0, [1.5])
    with pytest.raises(TypeError):
        derive_stream(0, [True])
