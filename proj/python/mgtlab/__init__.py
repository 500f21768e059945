"""Python access to the fractional MGT solvers and experiment pipelines."""

from ._mgtlab import (
    ConfigError,
    FracOp,
    Grid,
    MgtError,
    __version__,
    build_fracop,
    default_config,
    default_grid_1d,
    operator_laws,
    pipeline_names,
    read_field,
    run_experiment,
    sha256_hex,
    solve_exterior,
    validate_config,
)


def run(pipeline, out, **sections):
    """Run a pipeline from its defaults, with per-section overrides.

    Example: run("dn", "out/dn", grid={"N": 31}, time={"T": 1.0, "dt": 0.01})
    """
    cfg = default_config(pipeline)
    for name, values in sections.items():
        if isinstance(values, dict) and isinstance(cfg.get(name), dict):
            cfg[name].update(values)
        else:
            cfg[name] = values
    cfg["output"] = {"dir": str(out)}
    return run_experiment(cfg)


__all__ = [
    "ConfigError",
    "FracOp",
    "Grid",
    "MgtError",
    "__version__",
    "build_fracop",
    "default_config",
    "default_grid_1d",
    "operator_laws",
    "pipeline_names",
    "read_field",
    "run",
    "run_experiment",
    "sha256_hex",
    "solve_exterior",
    "validate_config",
]
