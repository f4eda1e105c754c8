import json

import pytest

from idledqn.harness import compare_metrics, expected_path, load_config, run_experiment, summary_metrics

CONFIGS = ["fig1a", "fig1b", "fig2a", "fig2b", "fig3a", "fig3b", "fig4a", "fig4b", "alpha_sweep"]


@pytest.mark.slow
@pytest.mark.parametrize("name", CONFIGS)
def test_expected_summary(name):
    want = json.loads(expected_path(name).read_text())
    got = summary_metrics(run_experiment(load_config(name)))
    assert compare_metrics(got, want["metrics"], want["tolerances"]) == []
