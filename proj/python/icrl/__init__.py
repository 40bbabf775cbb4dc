"""Python surface of the constraint-learning laboratory.

The heavy lifting lives in the compiled ``_core`` extension; this module adds
dict-friendly wrappers around the JSON-string entry points.
"""

import json

try:  # installed layout: the extension sits inside the package
    from . import _core
except ImportError:  # build-tree layout: extension on PYTHONPATH
    import _core

ConvergenceError = _core.ConvergenceError
Env = _core.Env
TabularMDP = _core.TabularMDP
Transition = _core.Transition

env_names = _core.env_names
make_env = _core.make_env
point_circle_reward = _core.point_circle_reward
gae = _core.gae
lagrangian_step = _core.lagrangian_step
soft_solve = _core.soft_solve
trajectory_distribution = _core.trajectory_distribution
exact_kl = _core.exact_kl
kl_bounds = _core.kl_bounds
export_plot_data = _core.export_plot_data
constraint_scores = _core.constraint_scores


def default_config(env_name):
    """Per-environment default run configuration as a dict."""
    return json.loads(_core.default_config_json(env_name))


def run_training(config, out_dir, expert_data=None):
    """Run icrl / bc / gc / nominal end to end; returns run dir and metric rows.

    ``expert_data`` optionally points at a recorded demonstration dataset;
    the expert is trained from scratch when omitted.
    """
    return _core.run_training_json(
        json.dumps(config), str(out_dir), str(expert_data) if expert_data else ""
    )


def generate_expert_dataset(config, out_path):
    """Train a constrained expert and write its demonstrations."""
    return _core.generate_expert_dataset_json(json.dumps(config), str(out_path))


def transfer(source_constraint, config, out_dir):
    """Solve a target environment against a frozen constraint checkpoint."""
    return _core.transfer_json(str(source_constraint), json.dumps(config), str(out_dir))
