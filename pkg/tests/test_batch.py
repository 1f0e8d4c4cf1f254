import numpy as np
import pytest

from vecrbd.batch import BatchRunner, StateBatch, batch_eval, physical_cores
from vecrbd.dynamics import crba, forward_dynamics, gravity_vector, rnea
from vecrbd.errors import DimensionError
from vecrbd.kinematics import frame_transform


def test_state_batch_shapes(arm):
    b = StateBatch.random(arm, 5, seed=1)
    assert (b.N, b.n, len(b)) == (5, 7, 5)
    assert b.qd.shape == b.qdd.shape == b.tau.shape == (5, 7)
    with pytest.raises(DimensionError):
        StateBatch(np.zeros((3, 7)), qd=np.zeros((2, 7)))
    with pytest.raises(DimensionError):
        StateBatch(np.zeros(7))


def test_random_batch_is_seeded(arm):
    a, b = StateBatch.random(arm, 4, seed=9), StateBatch.random(arm, 4, seed=9)
    np.testing.assert_array_equal(a.q, b.q)
    assert StateBatch.random(arm, 4, seed=9, fields=("q",)).qd is None


def test_single_state_equals_direct_call(floating):
    b = StateBatch.random(floating, 1, seed=2)
    out = batch_eval(rnea, floating, b)
    assert out.shape == (1, 29)
    np.testing.assert_array_equal(out[0], rnea(floating, b.q[0], b.qd[0], b.qdd[0]))


@pytest.mark.parametrize("workers", [1, 2, 3, 8])
def test_bitwise_determinism(floating, workers):
    b = StateBatch.random(floating, 256, seed=3)
    serial = np.stack([rnea(floating, *row) for row in zip(b.q, b.qd, b.qdd)])
    out = batch_eval(rnea, floating, b, workers=workers)
    assert out.tobytes() == serial.tobytes()


def test_argument_selection(arm):
    b = StateBatch.random(arm, 6, seed=4)
    np.testing.assert_array_equal(batch_eval(crba, arm, b)[2], crba(arm, b.q[2]))
    np.testing.assert_array_equal(batch_eval(gravity_vector, arm, b)[3], gravity_vector(arm, b.q[3]))
    np.testing.assert_array_equal(batch_eval(forward_dynamics, arm, b, workers=2)[1],
                                  forward_dynamics(arm, b.q[1], b.qd[1], b.tau[1]))


def test_custom_function(arm):
    def tcp(model, q):
        return frame_transform(model, q, "hand_tcp").translation

    b = StateBatch.random(arm, 10, seed=5, fields=("q",))
    out = batch_eval(tcp, arm, b, workers=2)
    np.testing.assert_array_equal(out[7], tcp(arm, b.q[7]))


def test_missing_field(arm):
    with pytest.raises(DimensionError):
        batch_eval(rnea, arm, StateBatch.random(arm, 3, fields=("q",)))


def test_wrong_width(arm):
    with pytest.raises(DimensionError):
        batch_eval(rnea, arm, StateBatch(np.zeros((2, 6)), np.zeros((2, 6)), np.zeros((2, 6))))


def test_runner_reuse(arm):
    b = StateBatch.random(arm, 40, seed=6)
    with BatchRunner(rnea, arm, workers=2) as run:
        first, second = run(b), run(b)
    assert first.tobytes() == second.tobytes()
    with pytest.raises(ValueError):
        BatchRunner(rnea, arm, workers=0)


def test_physical_cores():
    assert physical_cores() >= 1
