"""Command-line entry point: run one workflow, emit one CSV plus metadata.

Usage: floqdyn <workflow> (--config FILE | --preset NAME) [--seed N]
[--out PATH] [--threads N].  Datasets are written atomically (temp file then
rename) with 17-significant-digit floats, so a rerun with the same config
and seed is byte-identical.  A .meta.json sidecar records the effective
config, seed, package version, and solver diagnostics.

Exit codes: 0 success, 2 configuration/usage error, 3 numerical abort,
4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

THREADS_ENV = "FLOQDYN_THREADS"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _cap_threads(n: int) -> None:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


# Thread caps must land before numpy initializes its BLAS pools, hence the
# env-var dance at import time here and the numpy import afterwards.
_cap_threads(int(os.environ.get(THREADS_ENV, "0") or 0) or os.cpu_count() or 1)

import numpy as np  # noqa: E402

from . import __version__  # noqa: E402
from .config import (  # noqa: E402
    ConfigError,
    RunConfig,
    WORKFLOWS,
    effective_yaml,
    parse_config,
    preset_config,
)

__all__ = ["main", "run", "render_csv"]


def _ground_state_density(h0: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(h0)
    v = evecs[:, 0]
    return np.outer(v, v.conj())


def _run_floquet_propagate(cfg: RunConfig):
    from .floquet import (
        FourierHamiltonian,
        assemble_floquet_hamiltonian,
        floquet_density_components,
        floquet_observable,
        quasi_eigensystem,
    )

    m = cfg.model
    num = cfg.numerics
    ham = FourierHamiltonian(
        {0: np.array(m["h0"]), 1: np.array(m["h1"])}, omega=m["omega"]
    )
    eig = quasi_eigensystem(assemble_floquet_hamiltonian(ham, num["n_max"]))
    rho0 = _ground_state_density(np.array(m["h0"]))
    obs = {0: np.array(num["observable"])}
    t_grid = np.linspace(0.0, num["n_periods"] * ham.period, num["n_out"])
    rows = []
    for t in t_grid:
        comps = floquet_density_components(eig, rho0, t)
        rows.append({"t": t, "observable": floquet_observable(obs, comps, t, ham.omega)})
    diag = {"n_max": num["n_max"], "quasienergy_range": [
        float(eig.quasienergies.min()), float(eig.quasienergies.max())]}
    return ["t", "observable"], rows, diag


def _run_qme(cfg: RunConfig):
    from .floquet import FourierHamiltonian
    from .redfield import LeadSpec, build_context, fock_operators, propagate_qme

    m = cfg.model
    num = cfg.numerics
    ham = FourierHamiltonian(
        {0: np.array(m["h0"]), 1: np.array(m["h1"])}, omega=m["omega"]
    )
    leads = [
        LeadSpec(gamma=np.array(lb["gamma"], dtype=complex), mu=lb["mu"], beta=lb["beta"])
        for lb in m["leads"]
    ]
    ctx = build_context(ham, leads, num["n_max"])
    cs = fock_operators(ham.dim)
    n_op = sum(c.conj().T @ c for c in cs)
    rho0 = np.zeros((2**ham.dim, 2**ham.dim), dtype=complex)
    rho0[0, 0] = 1.0  # start from the empty state
    t_grid = np.linspace(0.0, num["t_max"], num["n_out"])
    res = propagate_qme(
        num["flavor"], rho0, t_grid, ctx, {"N": n_op}, dt_max=num["dt_max"]
    )
    rows = [
        {"t": t, "N": v} for t, v in zip(res.t_grid, res.observables["N"])
    ]
    diag = {
        "flavor": num["flavor"],
        "n_max": num["n_max"],
        "trace_drift": res.trace_drift,
        "min_eigenvalue": res.min_eigenvalue,
    }
    return ["t", "N"], rows, diag


def _run_friction_scan(cfg: RunConfig):
    from .friction import JunctionModel, friction_scan
    from .redfield import LeadSpec

    m = cfg.model
    num = cfg.numerics
    leads = [
        LeadSpec(gamma=np.diag([m["gamma_L"], 0.0]).astype(complex), mu=m["mu_L"], beta=m["beta"]),
        LeadSpec(gamma=np.diag([0.0, m["gamma_R"]]).astype(complex), mu=m["mu_R"], beta=m["beta"]),
    ]
    model = JunctionModel(
        A=m["A"], B=m["B"][0], Delta=m["Delta"], omega=m["omega"],
        leads=leads, n_max=num["n_max"],
    )
    x_grid = np.linspace(num["x_min"], num["x_max"], num["n_x"])
    y_grid = np.linspace(num["y_min"], num["y_max"], num["n_y"])
    rows = friction_scan(model, x_grid, y_grid, m["B"])
    cols = ["x", "y", "B", "gamma_xx", "gamma_xy", "gamma_yx", "gamma_yy",
            "gamma_S_xy", "gamma_A_xy"]
    diag = {"n_max": num["n_max"], "n_points": len(rows)}
    return cols, rows, diag


def _run_sh(cfg: RunConfig):
    from .hopping import AHParams, run_ensemble

    m = cfg.model
    num = cfg.numerics
    prm = AHParams(
        E_d=m["E_d"], A=m["A"], Omega=m["Omega"], g=m["g"],
        hbar_omega=m["hbar_omega"], kT=m["kT"], Gamma=m["Gamma"],
        mu=m["mu"], n_bessel=m["n_bessel"],
    )
    res = run_ensemble(
        prm, num["n_traj"], num["t_max"], num["dt"],
        init=num["init"], seed=cfg.seed, n_out=num["n_out"],
    )
    rows = [
        {"t": t, "N_mean": nm, "N_stderr": ns, "Ek_mean": em, "Ek_stderr": es}
        for t, nm, ns, em, es in zip(
            res.t_grid, res.N_mean, res.N_stderr, res.Ek_mean, res.Ek_stderr
        )
    ]
    diag = {"n_traj": res.n_traj, "n_bessel": prm.n_bessel}
    return ["t", "N_mean", "N_stderr", "Ek_mean", "Ek_stderr"], rows, diag


_RUNNERS = {
    "floquet-propagate": _run_floquet_propagate,
    "qme-run": _run_qme,
    "friction-scan": _run_friction_scan,
    "sh-run": _run_sh,
}


def render_csv(columns, rows) -> str:
    """RFC-4180-style CSV text with round-trip-exact float formatting."""
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(format(float(row[c]), ".17g") for c in columns))
    return "\r\n".join(lines) + "\r\n"


def _atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".floqdyn-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run(cfg: RunConfig, out_path: str | None = None) -> str:
    """Execute one validated run; returns the dataset path."""
    columns, rows, diagnostics = _RUNNERS[cfg.workflow](cfg)
    path = out_path or cfg.output["path"]
    _atomic_write(path, render_csv(columns, rows))
    meta = {
        "effective_config": cfg.as_dict(),
        "seed": cfg.seed,
        "version": __version__,
        "columns": columns,
        "diagnostics": diagnostics,
    }
    _atomic_write(path + ".meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="floqdyn",
        description="Periodically driven open-quantum-system workflows",
    )
    p.add_argument("workflow", choices=WORKFLOWS)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="YAML run configuration file")
    src.add_argument("--preset", help="shipped named configuration")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="override the output dataset path")
    p.add_argument("--threads", type=int, help=f"thread cap (default ${THREADS_ENV})")
    p.add_argument("--echo", action="store_true",
                   help="print the effective config before running")
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("floqdyn: --threads must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        _cap_threads(args.threads)
    try:
        if args.preset is not None:
            cfg = preset_config(args.preset)
        else:
            with open(args.config) as fh:
                cfg = parse_config(fh.read())
    except ConfigError as e:
        print(f"floqdyn: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"floqdyn: cannot read config: {e}", file=sys.stderr)
        return EXIT_IO
    if cfg.workflow != args.workflow:
        print(
            f"floqdyn: config is for workflow {cfg.workflow!r}, not {args.workflow!r}",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            print("floqdyn: --seed must fit in an unsigned 64-bit integer",
                  file=sys.stderr)
            return EXIT_CONFIG
        cfg = RunConfig(cfg.workflow, cfg.model, cfg.numerics, cfg.output, args.seed)
    if args.echo:
        sys.stdout.write(effective_yaml(cfg))
    try:
        path = run(cfg, out_path=args.out)
    except (ConfigError, ValueError) as e:
        print(f"floqdyn: invalid run: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"floqdyn: numerical abort: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as e:
        print(f"floqdyn: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
