"""Smoke tests for the python bindings."""

import math

import pytest

import icrl


def test_env_registry_and_rollout():
    names = icrl.env_names()
    assert "lapgridworld" in names and "pointmass" in names
    env = icrl.make_env("lapgridworld")
    assert env.name == "lapgridworld"
    assert env.horizon == 200
    state = env.reset(0)
    assert state == [0.0]
    tr = env.step(state, [0.0], "nominal")
    assert tr.next_state == [1.0]
    assert env.true_violation(state, [1.0])
    assert not env.true_violation(state, [0.0])


def test_gae_single_step():
    assert icrl.gae([2.5], [0.0, 0.0], 0.99, 0.95) == [2.5]


def test_lagrangian_projection():
    assert icrl.lagrangian_step(1.0, 0.5, 0.0, 0.1) == pytest.approx(1.05)
    assert icrl.lagrangian_step(0.0, -1.0, 0.0, 0.1) == 0.0


def test_soft_solve_distribution_sums_to_one():
    env = icrl.make_env("lapgridworld")
    mdp = env.to_tabular()
    mdp.horizon = 8
    feas = [1.0] * (mdp.num_states * mdp.num_actions)
    actions, probs = icrl.trajectory_distribution(mdp, 0.5, feas)
    assert len(actions) == 2**8
    assert sum(probs) == pytest.approx(1.0, abs=1e-10)
    policy, log_z = icrl.soft_solve(mdp, 0.5, feas)
    assert len(policy) == 8
    assert math.isfinite(log_z)


def test_exact_kl_and_bounds():
    fwd, rev = icrl.exact_kl([0.5, 0.5], [0.5, 0.5])
    assert fwd == 0.0 and rev == 0.0
    fb, rb = icrl.kl_bounds([1.0, 1.0, 1.0])
    assert fb == 0.0 and rb == 0.0
    fb, _ = icrl.kl_bounds([math.e] * 4)
    assert fb == pytest.approx(2.0)


def test_point_circle_reward():
    assert icrl.point_circle_reward(10.0, 0.0, 0.0, 0.1) == pytest.approx(1.0)
    assert icrl.point_circle_reward(0.0, 0.0, 0.0, 0.0) == 0.0


def test_default_config_round_trip():
    cfg = icrl.default_config("lapgridworld")
    assert cfg["env"] == "lapgridworld"
    assert cfg["forward"]["target_kl"] == pytest.approx(0.01)
    assert cfg["backward"]["iterations"] == 10


def _write_clockwise_expert(path, rollouts=2, horizon=40):
    env = icrl.make_env("lapgridworld")
    header = {
        "format_version": 1,
        "kind": "trajectory_dataset",
        "env": "lapgridworld",
        "horizon": env.horizon,
    }
    import json as _json

    with open(path, "w") as f:
        f.write(_json.dumps(header) + "\n")
        for _ in range(rollouts):
            state = env.reset(0)
            states, actions, rewards, dones = [state], [], [], []
            for t in range(horizon):
                tr = env.step(state, [0.0], "constrained")
                state = tr.next_state
                states.append(state)
                actions.append([0.0])
                rewards.append(tr.reward)
                dones.append(t + 1 == horizon)
            rec = {"states": states, "actions": actions, "rewards": rewards, "dones": dones}
            f.write(_json.dumps(rec) + "\n")


def test_tiny_training_run(tmp_path):
    expert_path = tmp_path / "expert.jsonl"
    _write_clockwise_expert(expert_path)
    cfg = icrl.default_config("lapgridworld")
    cfg["seed"] = 3
    cfg["outer_iterations"] = 1
    cfg["rollout_length"] = 40
    cfg["nominal_rollouts"] = 3
    cfg["eval_episodes"] = 2
    cfg["forward"]["rounds"] = 2
    cfg["forward"]["steps_per_round"] = 400
    cfg["backward"]["iterations"] = 2
    result = icrl.run_training(cfg, tmp_path / "run", expert_data=expert_path)
    assert (tmp_path / "run" / "metrics.csv").exists()
    assert (tmp_path / "run" / "zeta.json").exists()
    assert len(result["metrics"]) == 2
