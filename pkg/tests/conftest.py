"""Shared fixtures and helpers for the test suite."""

import numpy as np
import pytest

from egbeam import algorithm, dual_eg, fp, rsma, sensing
from egbeam.config import EhParams, Scenario, SystemConfig, generate_scenario


def random_state(s, rng, p_t=None):
    """Random precoder state on the power sphere with a feasible c split."""
    k, n_tx = s.n_users, s.n_tx
    raw = rng.standard_normal((n_tx, k + 1)) + 1j * rng.standard_normal((n_tx, k + 1))
    if p_t is not None:
        raw *= np.sqrt(p_t) / np.linalg.norm(raw)
    P = rsma.PrecoderState.from_matrix(raw, np.zeros(k))
    cap = max(float(np.min(np.log1p(rsma.compute_sinrs(P, s).sinr_common))), 0.0)
    c = rng.dirichlet(np.ones(k)) * cap * rng.uniform()
    return rsma.PrecoderState.from_matrix(raw, c)


def tiny_config(**overrides):
    """K=2, N_t=2, L=1 configuration for oracle-scale subproblems."""
    base = dict(
        n_tx=2, n_rx=2, n_users=2, n_ers=1,
        eh_params=[EhParams()], eh_thresholds=[1e-3],
    )
    base.update(overrides)
    return SystemConfig(**base)


def build_context(s, cfg, P=None, sdma=False):
    """Subproblem context anchored at P (default: the standard initializer)."""
    if P is None:
        P = algorithm.init_precoder(s, cfg, "SDMA" if sdma else "RSMA")
    aux = fp.optimal_aux(P, s)
    if sdma:
        aux.phi_c = np.zeros_like(aux.phi_c)
        aux.theta_c = np.zeros_like(aux.theta_c)
    anchor = P.matrix()
    bundle = sensing.fim(anchor, s, n_rx=cfg.n_rx, det_rtol=cfg.fim_det_rtol)
    surrogate = sensing.surrogate_matrices(bundle, cfg.psd_margin)

    def obj(p_mat, c):
        return rsma.objective(rsma.PrecoderState.from_matrix(p_mat, c), s, cfg)

    ctx = dual_eg.SubproblemContext(s, cfg, aux, anchor, surrogate,
                                    objective_fn=obj, sdma=sdma)
    start = dual_eg.VIPoint(P=anchor.copy(), c=P.c_alloc.copy(), r=0.0,
                            dual=dual_eg.initial_duals(ctx, cfg))
    return ctx, start


# pass/fail lines recorded by the acceptance tests, echoed after the run
# (stdout of passing tests is otherwise captured and hidden)
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def default_scenario():
    cfg = SystemConfig()
    return generate_scenario(cfg, seed_offset=0), cfg
