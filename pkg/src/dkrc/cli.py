"""Command-line front end: collect -> train -> control -> eigen.

Every command is a pure function of (config file, flag overrides); all
randomness derives from run.seed through counter-based splitting, and the
effective config is echoed into the output directory.
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, config as config_mod, control, data, envs, koopman, seeding
from .errors import DkrcError


def _build_env(cfg):
    if cfg.env.name == "pendulum":
        p = cfg.pendulum
        return envs.Pendulum(envs.PendulumParams(
            m=p.m, l=p.l, g=p.g, gamma=p.gamma, dt=p.dt,
            max_speed=p.max_speed, max_torque=p.max_torque,
        ))
    if cfg.env.name == "lander":
        p = cfg.lander
        return envs.Lander(envs.LanderParams(
            main_accel=p.main_accel, side_accel=p.side_accel,
            side_torque=p.side_torque, gravity=p.gravity,
            dt=p.dt, ground=p.ground,
        ))
    raise ValueError(f"unknown environment {cfg.env.name!r}; valid options: pendulum, lander")


def _thresholds(cfg) -> analysis.SuccessThresholds:
    a = cfg.analysis
    return analysis.SuccessThresholds(
        pend_angle=a.pend_angle, pend_speed=a.pend_speed, pend_window=a.pend_window,
        lander_x=a.lander_x, lander_y=a.lander_y,
        lander_theta=a.lander_theta, lander_speed=a.lander_speed,
    )


def _echo_config(cfg, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    config_mod.save_config(cfg, out / "config_used.cfg")


def cmd_collect(cfg, out: Path) -> int:
    env = _build_env(cfg)
    m = env.spec.control_dim
    noise = data.OuNoise(
        mu=np.full(m, cfg.data.ou_mu),
        theta_rate=cfg.data.ou_theta,
        sigma=cfg.data.ou_sigma,
        dt=cfg.data.ou_dt,
    )
    ds = data.collect(env, cfg.data.episodes, cfg.data.steps, noise, cfg.run.seed)
    ds = data.split(ds, (cfg.data.train_frac, cfg.data.val_frac, cfg.data.test_frac),
                    cfg.run.seed)
    _echo_config(cfg, out)
    path = out / cfg.paths.dataset
    data.save(ds, path)
    counts = ds.counts()
    print(f"collected {len(ds)} triples from {cfg.data.episodes} episodes -> {path}")
    print("split counts: " + ", ".join(f"{k}={counts.get(k, 0)}" for k in data.SPLIT_NAMES))
    return 0


def cmd_train(cfg, out: Path) -> int:
    ds_path = out / cfg.paths.dataset
    if not ds_path.exists():
        raise FileNotFoundError(f"dataset file not found: {ds_path} (run 'dkrc collect' first)")
    ds = data.load(ds_path)
    env = _build_env(cfg)
    settings = koopman.TrainSettings(
        lift_dim=config_mod.lift_dim(cfg),
        hidden=cfg.net.hidden,
        n_hidden=cfg.net.depth,
        epochs=cfg.train.epochs,
        batch=cfg.train.batch,
        blend=cfg.train.blend,
        lr=cfg.train.lr,
        beta1=cfg.train.beta1,
        beta2=cfg.train.beta2,
        eps=cfg.train.eps,
        rank_tol=cfg.train.rank_tol,
        smooth_rank=cfg.train.smooth_rank,
        constrained_c=cfg.train.constrained_c,
        seed=cfg.run.seed,
    )
    model, report = koopman.train(ds, env.spec.goal_obs, settings)
    _echo_config(cfg, out)
    model_path = out / cfg.paths.model
    koopman.save_model(model, model_path, koopman.settings_to_config(settings))
    report.save(out / cfg.paths.report)
    if report.rank:
        print(f"final controllability rank {report.rank[-1]}/{settings.lift_dim}, "
              f"validation one-step error {report.val_err[-1]:.3e}")
    else:
        print("trained for 0 epochs; model written with initial lifting")
    print(f"model -> {model_path}")
    return 0


def _make_policy(cfg, model, env):
    method = cfg.control.method
    if method == "auto":
        method = "mpc" if env.spec.name == "pendulum" else "lqr"
    n = env.spec.obs_dim
    m = env.spec.control_dim
    q = cfg.control.q * np.eye(n)
    r = cfg.control.r * np.eye(m)
    if method == "lqr":
        law = control.design_lqr(model, q, r, cfg.control.dare_tol, cfg.control.dare_max_iter)
    elif method == "mpc":
        law = control.MpcProblem(
            horizon=cfg.control.horizon, q=q, r=r,
            v_lo=env.spec.control_lo - model.u0,
            v_hi=env.spec.control_hi - model.u0,
            tol=cfg.control.mpc_tol, max_iter=cfg.control.mpc_max_iter,
        )
    else:
        raise ValueError(f"unknown control method {method!r}; valid options: auto, lqr, mpc")
    return lambda: control.make_policy(model, law, env.spec.control_lo, env.spec.control_hi)


def cmd_control(cfg, out: Path) -> int:
    model_path = out / cfg.paths.model
    if not model_path.exists():
        raise FileNotFoundError(f"model file not found: {model_path} (run 'dkrc train' first)")
    model, _ = koopman.load_model(model_path)
    env = _build_env(cfg)
    policy_factory = _make_policy(cfg, model, env)
    thresholds = _thresholds(cfg)
    _echo_config(cfg, out)

    reports = []
    for game in range(cfg.control.games):
        rng = seeding.spawn(cfg.run.seed, seeding.NS_GAMES, game)
        traj = envs.rollout(env, policy_factory(), cfg.control.game_steps, rng)
        envs.save_trajectory(traj, out / f"game{game:02d}.csv")
        rep = analysis.success_metrics(traj, env.spec, thresholds)
        extras = {}
        if env.spec.name == "pendulum":
            params = _build_env(cfg).params
            energy = analysis.energy_trace(traj, params)
            with open(out / f"game{game:02d}_energy.csv", "w") as fh:
                fh.write("t,energy\n")
                for t, e in enumerate(energy):
                    fh.write(f"{t},{e!r}\n")
            extras["final_energy"] = float(energy[-1])
        reports.append((rep, extras))

    n_success = sum(1 for rep, _ in reports if rep.success)
    lines = [f"games = {len(reports)}"]
    if reports:
        lines.append(f"success_rate = {n_success / len(reports)!r}")
        succ_steps = [rep.steps_to_success for rep, _ in reports if rep.success]
        mean_steps = float(np.mean(succ_steps)) if succ_steps else -1.0
        lines.append(f"mean_steps_to_success = {mean_steps!r}")
        lines.append(f"mean_effort = {float(np.mean([rep.effort for rep, _ in reports]))!r}")
    for i, (rep, extras) in enumerate(reports):
        lines.append(f"game{i:02d}.success = {'true' if rep.success else 'false'}")
        lines.append(f"game{i:02d}.steps_to_success = {rep.steps_to_success}")
        lines.append(f"game{i:02d}.effort = {rep.effort!r}")
        for key, val in extras.items():
            lines.append(f"game{i:02d}.{key} = {val!r}")
    with open(out / "metrics.txt", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"{n_success}/{len(reports)} games successful; metrics -> {out / 'metrics.txt'}")
    return 0


def cmd_eigen(cfg, out: Path) -> int:
    if cfg.env.name != "pendulum":
        raise ValueError("eigen grid is pendulum-only")
    model_path = out / cfg.paths.model
    if not model_path.exists():
        raise FileNotFoundError(f"model file not found: {model_path} (run 'dkrc train' first)")
    model, _ = koopman.load_model(model_path)
    top_k = cfg.analysis.top_k
    if top_k > model.lift_dim:
        print(f"warning: top_k={top_k} exceeds lifted dimension; clamping to {model.lift_dim}",
              file=sys.stderr)
        top_k = model.lift_dim
    theta = np.linspace(-np.pi, np.pi, cfg.analysis.grid)
    theta_dot = np.linspace(-8.0, 8.0, cfg.analysis.grid)
    grid = analysis.eigenfunction_grid(model, theta, theta_dot, top_k)
    _echo_config(cfg, out)
    for k in range(len(grid.values)):
        path = out / f"eigfun{k}.csv"
        analysis.save_eigenfunction_csv(grid, k, path)
        lam = grid.eigenvalues[k]
        print(f"eigenfunction {k}: lambda = {lam.real!r} + {lam.imag!r}j -> {path}")
    return 0


COMMANDS = {
    "collect": cmd_collect,
    "train": cmd_train,
    "control": cmd_control,
    "eigen": cmd_eigen,
}


def _parse(argv):
    parser = argparse.ArgumentParser(
        prog="dkrc",
        description="Learn a lifted linear model from trajectory data and control with it.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} stage")
        p.add_argument("--config", default=None,
                       help="config file (falls back to $DKRC_CONFIG, then defaults)")
        p.add_argument("--out", default=".", help="output directory root")
    args, extra = parser.parse_known_args(argv)

    overrides = []
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or "." not in tok:
            parser.error(f"unrecognized argument {tok!r} (overrides look like --section.key value)")
        if "=" in tok:
            key, _, val = tok[2:].partition("=")
            overrides.append((key, val))
            i += 1
        else:
            if i + 1 >= len(extra):
                parser.error(f"override {tok!r} is missing a value")
            overrides.append((tok[2:], extra[i + 1]))
            i += 2
    return args, overrides


def main(argv=None) -> int:
    args, overrides = _parse(argv)
    try:
        config_path = args.config or os.environ.get("DKRC_CONFIG")
        cfg = config_mod.load_config(config_path) if config_path else config_mod.RunConfig()
        for key, val in overrides:
            config_mod.set_key(cfg, key, val, where="command line")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out)
    except (DkrcError, OSError, ValueError) as exc:
        print(f"dkrc {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
