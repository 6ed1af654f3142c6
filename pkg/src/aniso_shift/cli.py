"""Batch front-end: INI experiment configs in, CSV/JSON reports and figures out.

Subcommands
-----------
``aniso-shift run <config>``       execute the configured experiment
``aniso-shift validate <config>``  parse and check constraints, run nothing

Exit status: 0 on success, 2 on a constraint violation (named in the
diagnostic), 3 on numerical non-convergence or an exhausted resolution budget.

Every CSV starts with ``#``-prefixed header lines carrying the config hash,
depths, exponents and potential specs; JSON reports carry the same block under
``meta``.  With a fixed config and seed the numeric outputs are byte-identical
across runs; figures are rendered next to them unless ``--no-figures``.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import __version__, figures, rpf
from .aniso import aniso_decompose, certify_holder_map, certify_multiplier, evaluate
from .bilateral import (
    TransferConfig,
    correlation,
    correlation_direct,
    decay_rate,
    essential_radius_bound,
    ergodic_maxima,
    gibbs_projection,
    norm_limited_probe,
    srb_experiment,
)
from .aniso import graph_measure, graph_riemann_sum
from .errors import (
    BudgetExhaustedError,
    ConstraintViolationError,
    NonConvergenceError,
)
from .grid_haar import ExponentConfig, SpaceTag, build_grid, decompose
from .potentials import Potential
from .shift_core import Cylinder, ProductField, Side, StepField, index_word, word_index

EXPERIMENTS = ("gibbs", "grid", "spectrum", "decay", "correlation", "graph", "srb")


@dataclass
class ExperimentConfig:
    """Parsed, validated experiment description."""

    kind: str
    alphabet: int
    seed: int
    depth_plus: int
    depth_minus: int
    k_max: int
    out: Path
    exponents: ExponentConfig
    pot_plus: Potential
    pot_minus: Potential
    pot_plus_spec: str
    pot_minus_spec: str
    observables: list[tuple[tuple, tuple]]
    graph_map: str
    srb_case: str
    srb_psi_plus: Potential | None
    srb_psi_minus: Potential | None
    srb_psi_plus_spec: str
    srb_psi_minus_spec: str
    n_points: int
    n_steps: int
    threads: int
    render_figures: bool
    config_hash: str
    flags: list[str] = dc_field(default_factory=list)


def _parse_potential(spec: str, side: Side, n: int) -> Potential:
    spec = spec.strip()
    if spec == "uniform":
        return Potential.uniform(side, n)
    if spec.startswith("markov:"):
        weights = [float(x) for x in spec.split(":", 1)[1].split()]
        if len(weights) != n * n:
            raise ConstraintViolationError(
                f"markov preset needs {n * n} row-major weights, got {len(weights)}"
            )
        return Potential.markov(side, np.array(weights).reshape(n, n))
    if spec.startswith("table:"):
        parts = spec.split(":", 2)
        if len(parts) != 3:
            raise ConstraintViolationError("table preset format is table:<range>:<values>")
        rng = int(parts[1])
        values = [float(x) for x in parts[2].split()]
        if len(values) != n**rng:
            raise ConstraintViolationError(
                f"range-{rng} table needs {n**rng} values, got {len(values)}"
            )
        return Potential(side, rng, np.array(values))
    raise ConstraintViolationError(f"unknown potential preset {spec!r}")


def _parse_word(token: str) -> tuple:
    return tuple(int(c) for c in token.strip()) if token.strip() else ()


def _parse_observables(raw: str) -> list[tuple[tuple, tuple]]:
    out = []
    for token in raw.split():
        if "|" not in token:
            raise ConstraintViolationError(
                f"observable {token!r} must look like <plusword>|<minusword>"
            )
        plus, minus = token.split("|", 1)
        out.append((_parse_word(plus), _parse_word(minus)))
    return out


def load_config(path: str | Path, *, out=None, seed=None, threads=None, render_figures=True) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConstraintViolationError(f"config file {path} is not readable")
    raw_bytes = path.read_bytes()
    parser = configparser.ConfigParser()
    parser.read_string(raw_bytes.decode())

    exp = parser["experiment"] if parser.has_section("experiment") else {}
    kind = exp.get("kind", "").strip()
    if kind not in EXPERIMENTS:
        raise ConstraintViolationError(
            f"experiment kind {kind!r} must be one of {', '.join(EXPERIMENTS)}"
        )
    n = int(exp.get("alphabet", "2"))
    if n < 2:
        raise ConstraintViolationError(f"alphabet size must be >= 2, got {n}")
    seed_val = seed if seed is not None else int(exp.get("seed", "1"))
    depth_plus = int(exp.get("depth_plus", "8"))
    depth_minus = int(exp.get("depth_minus", "10"))
    k_max = int(exp.get("k_max", "8"))
    out_dir = Path(out) if out is not None else Path(exp.get("out", "results"))

    ex = parser["exponents"] if parser.has_section("exponents") else {}
    exponents = ExponentConfig(
        s=float(ex.get("s", "0.25")),
        t=float(ex.get("t", "0.5")),
        beta=float(ex.get("beta", "1.0")),
        epsilon=float(ex["epsilon"]) if "epsilon" in ex else None,
        s_plus=float(ex.get("s_plus", "1.0")),
        t_minus=float(ex.get("t_minus", "1.0")),
    )

    plus_spec = parser.get("potential.plus", "preset", fallback="uniform")
    minus_spec = parser.get("potential.minus", "preset", fallback="uniform")
    pot_plus = _parse_potential(plus_spec, Side.PLUS, n)
    pot_minus = _parse_potential(minus_spec, Side.MINUS, n)

    observables = _parse_observables(
        parser.get("observables", "rects", fallback="0| |0")
    )

    graph_map = parser.get("graph", "map", fallback="mirror").strip()
    srb_case = parser.get("srb", "case", fallback="C").strip()
    srb_pp_spec = parser.get("srb", "psi_plus", fallback=plus_spec)
    srb_pm_spec = parser.get("srb", "psi_minus", fallback=minus_spec)
    srb_pp = _parse_potential(srb_pp_spec, Side.PLUS, n) if kind == "srb" else None
    srb_pm = _parse_potential(srb_pm_spec, Side.MINUS, n) if kind == "srb" else None
    n_points = int(parser.get("srb", "n_points", fallback="200"))
    n_steps = int(parser.get("srb", "n_steps", fallback="10000"))

    digest = hashlib.sha256(raw_bytes).hexdigest()[:16]
    cfg = ExperimentConfig(
        kind=kind,
        alphabet=n,
        seed=seed_val,
        depth_plus=depth_plus,
        depth_minus=depth_minus,
        k_max=k_max,
        out=out_dir,
        exponents=exponents,
        pot_plus=pot_plus,
        pot_minus=pot_minus,
        pot_plus_spec=plus_spec,
        pot_minus_spec=minus_spec,
        observables=observables,
        graph_map=graph_map,
        srb_case=srb_case,
        srb_psi_plus=srb_pp,
        srb_psi_minus=srb_pm,
        srb_psi_plus_spec=srb_pp_spec,
        srb_psi_minus_spec=srb_pm_spec,
        n_points=n_points,
        n_steps=n_steps,
        threads=threads if threads is not None else 1,
        render_figures=render_figures,
        config_hash=digest,
    )
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    """Up-front constraint checks with named diagnostics."""
    if cfg.depth_plus < cfg.pot_plus.range_ or cfg.depth_minus < cfg.pot_minus.range_:
        raise ConstraintViolationError(
            "depth constraint violated: grid depths must reach the potential ranges"
        )
    if cfg.kind in ("spectrum", "decay", "correlation", "graph"):
        cfg.flags.extend(cfg.exponents.require_anisotropic())
    if cfg.kind in ("decay", "correlation"):
        need_minus = cfg.k_max + max(cfg.pot_minus.range_, 1) + 1
        if cfg.depth_minus < need_minus:
            raise ConstraintViolationError(
                "resolution budget violated: the contracting side needs "
                f"depth_minus >= k_max + range + 1 = {need_minus} (have {cfg.depth_minus})"
            )
    if cfg.kind == "correlation" and cfg.depth_plus < cfg.k_max + 2:
        raise ConstraintViolationError(
            "resolution budget violated: the expanding side needs "
            f"depth_plus >= k_max + 2 = {cfg.k_max + 2} (have {cfg.depth_plus})"
        )
    if cfg.kind == "graph":
        cfg.exponents.require_graph()
        if cfg.graph_map not in ("mirror", "first-symbol") and not cfg.graph_map.startswith("constant:"):
            raise ConstraintViolationError(
                f"graph map preset {cfg.graph_map!r} must be mirror, first-symbol or constant:<digits>"
            )
    if cfg.kind == "srb" and cfg.srb_case not in ("A", "B", "C"):
        raise ConstraintViolationError("srb case must be A, B or C")


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def _meta(cfg: ExperimentConfig) -> dict:
    return {
        "config_hash": cfg.config_hash,
        "kind": cfg.kind,
        "alphabet": cfg.alphabet,
        "seed": cfg.seed,
        "depth_plus": cfg.depth_plus,
        "depth_minus": cfg.depth_minus,
        "k_max": cfg.k_max,
        "s": cfg.exponents.s,
        "t": cfg.exponents.t,
        "beta": cfg.exponents.beta,
        "epsilon": cfg.exponents.eps,
        "potential_plus": cfg.pot_plus_spec,
        "potential_minus": cfg.pot_minus_spec,
        "threads": cfg.threads,
        "version": __version__,
        "flags": sorted(cfg.flags),
    }


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _fmt(v)
    return str(v)


def _write_csv(path: Path, cfg: ExperimentConfig, columns, rows) -> Path:
    lines = [f"# {key}: {value}" for key, value in sorted(_meta(cfg).items())]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def _write_json(path: Path, cfg: ExperimentConfig, payload: dict) -> Path:
    doc = {"meta": _meta(cfg), **payload}
    path.write_text(json.dumps(doc, sort_keys=True, indent=1, default=float) + "\n")
    return path


# ---------------------------------------------------------------------------
# Pipelines
# ---------------------------------------------------------------------------


def _word_label(word) -> str:
    return "".join(str(int(c)) for c in word) if len(word) else "-"


def _run_gibbs(cfg: ExperimentConfig) -> list[Path]:
    data = rpf.solve(cfg.pot_plus, cfg.depth_plus)
    cert = rpf.verify_gibbs(data)
    grid = build_grid(data)
    rows = []
    for depth in range(min(cfg.depth_plus, 8) + 1):
        for idx in range(cfg.alphabet**depth):
            word = index_word(idx, depth, cfg.alphabet)
            rows.append((depth, _word_label(word),
                         data.ref_levels[depth][idx], data.gibbs_levels[depth][idx]))
    out = [
        _write_csv(cfg.out / "gibbs_masses.csv", cfg,
                   ("depth", "word", "ref_mass", "gibbs_mass"), rows),
        _write_json(cfg.out / "gibbs_summary.json", cfg, {
            "pressure": data.pressure,
            "gibbs_c_low": cert.c_low,
            "gibbs_c_high": cert.c_high,
            "certificate_depth": cert.depth,
            "lambda1": grid.lambda1,
            "lambda2": grid.lambda2,
            "rho_min": float(data.rho.values.min()),
            "rho_max": float(data.rho.values.max()),
        }),
    ]
    if cfg.render_figures:
        d = min(cfg.depth_plus, 6)
        out.append(Path(figures.gibbs_figure(
            cfg.out / "gibbs.png", data.ref_levels[d], data.gibbs_levels[d], d)))
    return out


def _run_grid(cfg: ExperimentConfig) -> list[Path]:
    grids = {
        "plus": build_grid(rpf.solve(cfg.pot_plus, cfg.depth_plus)),
        "minus": build_grid(rpf.solve(cfg.pot_minus, cfg.depth_minus)),
    }
    rows, ratios_by_side = [], {}
    for side, grid in grids.items():
        depths, lows, highs = [], [], []
        n = grid.alphabet.size
        for k in range(grid.depth):
            r = grid.level_masses[k + 1] / np.repeat(grid.level_masses[k], n)
            rows.append((side, k + 1, float(r.min()), float(r.max())))
            depths.append(k + 1)
            lows.append(float(r.min()))
            highs.append(float(r.max()))
        ratios_by_side[side] = (depths, lows, highs)
    out = [
        _write_csv(cfg.out / "grid_ratios.csv", cfg,
                   ("side", "depth", "min_ratio", "max_ratio"), rows),
        _write_json(cfg.out / "grid_summary.json", cfg, {
            "lambda1_plus": grids["plus"].lambda1,
            "lambda2_plus": grids["plus"].lambda2,
            "lambda1_minus": grids["minus"].lambda1,
            "lambda2_minus": grids["minus"].lambda2,
        }),
    ]
    if cfg.render_figures:
        out.append(Path(figures.grid_figure(cfg.out / "grid.png", ratios_by_side)))
    return out


def _make_tc(cfg: ExperimentConfig) -> TransferConfig:
    tc = TransferConfig(cfg.pot_plus, cfg.pot_minus, cfg.exponents, cfg.depth_plus, cfg.depth_minus)
    cfg.flags.extend(f for f in tc.flags if f not in cfg.flags)
    return tc


def _run_spectrum(cfg: ExperimentConfig) -> list[Path]:
    tc = _make_tc(cfg)
    m_plus, m_minus = ergodic_maxima(tc)
    probe_k = max(1, min(cfg.k_max, cfg.depth_minus - 3))
    table = norm_limited_probe(tc, probe_k, probe_depth=2)
    spectrum = rpf.dense_spectrum(tc.phi_plus, max(tc.phi_plus.range_ + 1, 3))
    out = [
        _write_csv(cfg.out / "norm_limited.csv", cfg, ("k", "sup_probe_norm"),
                   list(enumerate(table))),
        _write_json(cfg.out / "spectrum.json", cfg, {
            "essential_radius_bound": essential_radius_bound(tc),
            "max_ergodic_plus": m_plus,
            "max_ergodic_minus": m_minus,
            "second_eigenvalue_plus": float(np.abs(spectrum[1])),
            "norm_limited_max": float(table.max()),
        }),
    ]
    if cfg.render_figures:
        out.append(Path(figures.spectrum_figure(
            cfg.out / "spectrum.png", table, essential_radius_bound(tc))))
    return out


def _coordinate_field(tc: TransferConfig) -> ProductField:
    vals = np.full((tc.alphabet.size, 1), -1.0)
    vals[0, 0] = 1.0
    return ProductField(1, 0, vals, tc.alphabet)


def _run_decay(cfg: ExperimentConfig) -> list[Path]:
    tc = _make_tc(cfg)
    pert = ProductField(1, 0,
                        1.0 + 0.4 * _coordinate_field(tc).values, tc.alphabet)
    v = aniso_decompose(pert, cfg.exponents.s, cfg.exponents.t, tc.grid_plus, tc.grid_minus)
    report = decay_rate(tc, v, cfg.k_max)
    columns = ["k", "e_norm"] + [f"cov_{name}" for name in report.corr_series]
    rows = []
    for k in range(cfg.k_max + 1):
        rows.append([k, report.e_norm[k]] + [report.corr_series[n][k] for n in report.corr_series])
    out = [
        _write_csv(cfg.out / "decay.csv", cfg, columns, rows),
        _write_json(cfg.out / "decay.json", cfg, {
            "lambda_norm": report.lambda_norm,
            "lambda_corr": report.lambda_corr,
            "essential_radius_bound": report.essential_bound,
            "second_eigenvalue_plus": report.second_eigenvalue,
            "identically_zero": report.exact,
            "fit_log_residual": report.residuals,
        }),
    ]
    if cfg.render_figures:
        out.append(Path(figures.decay_figure(
            cfg.out / "decay.png", report.e_norm, report.corr_series,
            report.lambda_norm, report.lambda_corr)))
    return out


def _run_correlation(cfg: ExperimentConfig) -> list[Path]:
    tc = _make_tc(cfg)
    gamma = _coordinate_field(tc)
    rho = certify_multiplier(gamma, cfg.exponents, tc.grid_plus, tc.grid_minus)
    mu = gibbs_projection(tc, cfg.k_max + 1, 1)
    one_nu = gibbs_projection(tc, 1, 0)
    rho_mass = evaluate(mu, gamma)
    gamma_mean = evaluate(one_nu, gamma)
    limit = rho_mass * gamma_mean
    ks = list(range(cfg.k_max + 1))
    cov, direct = [], []
    for k in ks:
        cov.append(correlation(tc, mu, rho, gamma, k) - limit)
        direct.append(correlation_direct(tc, mu, rho, gamma, k) - limit)
    cov_arr = np.abs(np.array(cov))
    mask = cov_arr > 1e-13
    rate = None
    if mask.sum() >= 2:
        slope = np.polyfit(np.array(ks)[mask], np.log(cov_arr[mask]), 1)[0]
        rate = float(np.exp(slope))
    rows = [(k, cov[k], direct[k]) for k in ks]
    out = [
        _write_csv(cfg.out / "correlation.csv", cfg, ("k", "covariance", "direct_check"), rows),
        _write_json(cfg.out / "correlation.json", cfg, {
            "fitted_rate": rate,
            "limit_product": limit,
            "second_eigenvalue_plus": float(np.abs(rpf.dense_spectrum(
                tc.phi_plus, max(tc.phi_plus.range_ + 1, 3))[1])),
            "max_direct_mismatch": float(np.max(np.abs(np.array(cov) - np.array(direct)))),
        }),
    ]
    if cfg.render_figures:
        out.append(Path(figures.correlation_figure(cfg.out / "correlation.png", ks, cov)))
    return out


def _graph_assignment(cfg: ExperimentConfig, n: int):
    dp, dm = cfg.depth_plus, cfg.depth_minus
    if cfg.graph_map == "mirror":
        if dm < dp:
            raise ConstraintViolationError(
                "graph map constraint violated: mirror needs depth_minus >= depth_plus"
            )
        return np.arange(n**dp, dtype=np.int64) * n ** (dm - dp)
    if cfg.graph_map == "first-symbol":
        rows = np.arange(n**dp, dtype=np.int64) // n ** (dp - 1)
        return rows * ((n**dm - 1) // max(n - 1, 1))
    digits = _parse_word(cfg.graph_map.split(":", 1)[1])
    if len(digits) != dm:
        raise ConstraintViolationError(
            f"constant graph map needs {dm} digits, got {len(digits)}"
        )
    return np.full(n**dp, word_index(digits, n), dtype=np.int64)


def _run_graph(cfg: ExperimentConfig) -> list[Path]:
    e = cfg.exponents
    grid_plus = build_grid(rpf.solve(cfg.pot_plus, cfg.depth_plus))
    grid_minus = build_grid(rpf.solve(cfg.pot_minus, cfg.depth_minus))
    u = certify_holder_map(_graph_assignment(cfg, cfg.alphabet), e.beta, grid_plus, grid_minus)
    rho = decompose(StepField.constant(Side.PLUS, 0, 1.0, grid_plus.alphabet),
                    SpaceTag.S_11, e.s, grid_plus)
    result = graph_measure(u, rho, e, grid_minus)
    wp, wm = cfg.observables[0]
    gamma = ProductField.rectangle(Cylinder.product(wp, wm), grid_plus.alphabet)
    lhs = evaluate(result.vector, gamma)
    rhs = graph_riemann_sum(u, rho, gamma)
    bound = 2.0 ** -(e.beta * e.t - e.s - e.eps) + 0.05
    out = [
        _write_csv(cfg.out / "graph_increments.csv", cfg, ("level", "increment"),
                   list(enumerate(result.increments))),
        _write_json(cfg.out / "graph.json", cfg, {
            "fitted_rate": result.fitted_rate,
            "rate_bound": bound,
            "holder_seminorm": u.seminorm,
            "rho_l1eps_norm": result.rho_l1eps_norm,
            "riemann_check_abs_err": abs(lhs - rhs),
            "evaluation": lhs,
        }),
    ]
    if cfg.render_figures:
        out.append(Path(figures.graph_figure(
            cfg.out / "graph.png", result.increments, result.fitted_rate)))
    return out


def _run_srb(cfg: ExperimentConfig) -> list[Path]:
    tc = TransferConfig(cfg.pot_plus, cfg.pot_minus, cfg.exponents,
                        max(cfg.pot_plus.range_, 3), max(cfg.pot_minus.range_, 3))
    report = srb_experiment(
        tc, cfg.srb_case, cfg.srb_psi_plus, cfg.srb_psi_minus,
        cfg.n_points, cfg.n_steps, cfg.observables, cfg.seed,
    )
    rows = []
    for r in report.rows:
        rows.append((
            _word_label(r.word_plus), _word_label(r.word_minus),
            r.forward_mean, r.forward_stderr, r.backward_mean, r.backward_stderr,
            r.nu_value, r.nu_minus_value if r.nu_minus_value is not None else float("nan"),
        ))
    out = [
        _write_csv(cfg.out / "srb_rows.csv", cfg,
                   ("word_plus", "word_minus", "forward_mean", "forward_stderr",
                    "backward_mean", "backward_stderr", "nu_value", "nu_minus_value"),
                   rows),
        _write_json(cfg.out / "srb.json", cfg, {
            "case": report.case,
            "plus_cohomologous": report.plus_cohomologous,
            "minus_cohomologous": report.minus_cohomologous,
            "n_points": report.n_points,
            "n_steps": report.n_steps,
            "sampler_plus": cfg.srb_psi_plus_spec,
            "sampler_minus": cfg.srb_psi_minus_spec,
        }),
    ]
    if cfg.render_figures:
        out.append(Path(figures.srb_figure(cfg.out / "srb.png", report.rows)))
    return out


_RUNNERS = {
    "gibbs": _run_gibbs,
    "grid": _run_grid,
    "spectrum": _run_spectrum,
    "decay": _run_decay,
    "correlation": _run_correlation,
    "graph": _run_graph,
    "srb": _run_srb,
}


def run_experiment(cfg: ExperimentConfig) -> list[Path]:
    cfg.out.mkdir(parents=True, exist_ok=True)
    return _RUNNERS[cfg.kind](cfg)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="aniso-shift", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "validate"):
        p = sub.add_parser(name)
        p.add_argument("config", help="experiment config file (INI)")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--threads", type=int, default=None,
                       help="worker hint recorded in report metadata")
        p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(
            args.config, out=args.out, seed=args.seed, threads=args.threads,
            render_figures=not args.no_figures,
        )
    except ConstraintViolationError as err:
        print(f"constraint violation: {err}", file=sys.stderr)
        return 2
    except (configparser.Error, ValueError) as err:
        print(f"constraint violation: malformed config: {err}", file=sys.stderr)
        return 2
    for flag in cfg.flags:
        print(f"flag: {flag}", file=sys.stderr)
    if args.command == "validate":
        print(f"config ok: {cfg.kind} experiment, hash {cfg.config_hash}")
        return 0
    try:
        written = run_experiment(cfg)
    except ConstraintViolationError as err:
        print(f"constraint violation: {err}", file=sys.stderr)
        return 2
    except (NonConvergenceError, BudgetExhaustedError) as err:
        print(f"numerical non-convergence: {err}", file=sys.stderr)
        return 3
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
