"""Adam against a hand-rolled recurrence oracle, and the warmup schedule's
closed form."""

import numpy as np
import pytest

from beatlab.errors import DomainError, OptimizerError
from beatlab.nn import Adam, NoamSchedule, Parameter, noam_lr


def test_noam_closed_form_values():
    assert abs(noam_lr(400, warmup=400, base=0.015) - 7.5e-4) < 1e-12
    assert abs(noam_lr(100, warmup=400, base=0.015) - 1.875e-4) < 1e-12


def test_noam_peaks_exactly_at_warmup():
    values = [noam_lr(s, warmup=400, base=0.015) for s in (399, 400, 401)]
    assert values[0] < values[1] > values[2]
    assert max(noam_lr(s, warmup=400, base=0.015)
               for s in range(1, 2000)) == noam_lr(400, warmup=400, base=0.015)


def test_noam_rejects_step_zero():
    with pytest.raises(DomainError):
        noam_lr(0)


def test_noam_schedule_counter():
    sched = NoamSchedule(warmup=10, base=1.0)
    lrs = [sched.next_lr() for _ in range(3)]
    assert lrs == [noam_lr(1, 10, 1.0), noam_lr(2, 10, 1.0), noam_lr(3, 10, 1.0)]


def test_adam_first_step_magnitude():
    p = Parameter(np.zeros(4))
    p.grad = np.ones(4)
    opt = Adam([p], lr=0.001)
    opt.step()
    np.testing.assert_allclose(p.data, -0.001 / (1 + 1e-8) * np.ones(4),
                               rtol=1e-12)


def test_adam_zero_grad_zero_state_keeps_parameter():
    p = Parameter(np.array([1.0, -2.0]))
    p.grad = np.zeros(2)
    Adam([p], lr=0.1).step()
    np.testing.assert_array_equal(p.data, [1.0, -2.0])


def test_adam_three_steps_match_recurrence_oracle():
    rng = np.random.default_rng(3)
    x0 = rng.normal(size=5)
    grads = [rng.normal(size=5) for _ in range(3)]

    p = Parameter(x0.copy())
    opt = Adam([p], lr=0.01, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01)
    for g in grads:
        p.grad = g.copy()
        opt.step()
        p.zero_grad()

    # independent recurrence
    x = x0.copy()
    m = np.zeros(5)
    v = np.zeros(5)
    for t, g in enumerate(grads, start=1):
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        m_hat = m / (1 - 0.9 ** t)
        v_hat = v / (1 - 0.999 ** t)
        x = x - 0.01 * m_hat / (np.sqrt(v_hat) + 1e-8)
        x = x - 0.01 * 0.01 * x
    np.testing.assert_allclose(p.data, x, atol=1e-12)


def test_adam_requires_grad():
    p = Parameter(np.zeros(3))
    with pytest.raises(OptimizerError):
        Adam([p]).step()
