"""Batch command line: ``contextlab <command> [options]``.

Exit codes: 0 on success, 2 on domain errors (a JSON error object is
printed), 1 on usage errors.  Output goes to stdout or, with ``-o``, to a
file written atomically.  A ``--config`` file of ``key=value`` lines
supplies defaults for the chosen command; explicit flags win.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
import tempfile
from fractions import Fraction
from typing import Any, Callable

import click
import numpy as np

from .errors import ContextLabError

FORMATS = click.Choice(["json", "csv"])


# ---------------------------------------------------------------------------
# encoding


def _num(x: float) -> float | int | str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(f"{x:.12g}")


def encode(obj: Any) -> Any:
    """JSON-ready copy with floats at 12 significant digits and rationals as {value, exact}."""
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Fraction):
        return {"value": _num(obj), "exact": f"{obj.numerator}/{obj.denominator}"}
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, np.ndarray):
        return encode(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    raise TypeError(f"cannot encode {type(obj).__name__}")


def _cell(x: Any) -> str:
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def to_csv(header: list[str], rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(x) for x in r])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".contextlab-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(payload: dict, fmt: str, output: str | None, table: tuple[list[str], list[list[Any]]] | None = None) -> None:
    if fmt == "csv":
        if table is None:
            raise click.UsageError("this report has no CSV form; use --format json")
        text = to_csv(*table)
    else:
        text = json.dumps(encode(payload), indent=2, sort_keys=True) + "\n"
    if output:
        write_atomic(output, text)
    else:
        click.echo(text, nl=False)


def read_config(path: str) -> dict[str, str]:
    """key=value lines; '#' starts a comment; keys may use dashes or underscores."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise click.UsageError(f"{path}:{lineno}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def run_selftest(checks: list[tuple[str, Callable[[], bool]]]) -> None:
    failed = 0
    for name, fn in checks:
        try:
            ok = bool(fn())
        except Exception as exc:  # a crashing check is a failing check
            ok = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        failed += not ok
        click.echo(f"{'PASS' if ok else 'FAIL'}  {name}")
    click.echo(f"{len(checks) - failed}/{len(checks)} checks passed")
    if failed:
        raise SystemExit(2)


def parse_n_list(text: str) -> list[int]:
    """'3..14,99,100' -> [3, 4, ..., 14, 99, 100]."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..", 1)
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise click.BadParameter("empty list of n values")
    return out


def _load_json(path: str) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def common(f):
    f = click.option("--selftest", is_flag=True, help="Run this command's reference checks and exit.")(f)
    f = click.option("-o", "--output", type=click.Path(dir_okay=False), default=None, help="Write here instead of stdout.")(f)
    f = click.option("--format", "fmt", type=FORMATS, default="json", show_default=True)(f)
    f = click.option("--seed", type=int, default=0, show_default=True)(f)
    return f


# ---------------------------------------------------------------------------
# commands


def _config_defaults(cmd: click.Command, cfg: dict[str, str]) -> dict[str, str]:
    """Translate config keys (flag names) to the command's parameter names."""
    names: dict[str, str] = {}
    for param in cmd.params:
        names[param.name] = param.name
        for opt in getattr(param, "opts", []):
            names[opt.lstrip("-").replace("-", "_")] = param.name
    unknown = sorted(set(cfg) - set(names))
    if unknown:
        raise click.UsageError(f"unknown config keys for {cmd.name}: {', '.join(unknown)}")
    return {names[k]: v for k, v in cfg.items()}


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="key=value defaults for the command; flags win.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Contextuality and joint-measurability analyses as batch commands."""
    if config_path:
        cfg = read_config(config_path)
        sub = ctx.invoked_subcommand
        if sub in main.commands:
            ctx.default_map = {sub: _config_defaults(main.commands[sub], cfg)}


@main.command()
@click.option("--hypergraph", type=click.Path(exists=True, dir_okay=False), help="JSON {n_vertices, edges}.")
@click.option("--realize", is_flag=True, help="Also build qubit-block POVMs realising the hypergraph.")
@click.option("--eta", type=float, default=None, help="Sharpness for the noisy-spin compatibility tests.")
@click.option("--axis", "axes", multiple=True, help="Unit axis 'x,y,z'; repeat for each observable.")
@common
def jm(hypergraph, realize, eta, axes, seed, fmt, output, selftest):
    """Joint measurability: hypergraph analysis or noisy-spin compatibility tests."""
    from . import joint_measurability as J

    if selftest:
        return run_selftest(_jm_checks())
    if hypergraph:
        h = J.JmHypergraph.from_json(_load_json(hypergraph))
        payload = {"hypergraph": h.to_json(), "minimal_incompatible_sets": [list(s) for s in J.find_minimal_incompatible_sets(h)]}
        if realize:
            payload.update(_realization(h))
        table = (["set"], [[" ".join(map(str, s))] for s in payload["minimal_incompatible_sets"]])
        return emit(payload, fmt, output, table)
    if eta is None or not axes:
        raise click.UsageError("give --hypergraph, or --eta with one or more --axis")
    vecs = [tuple(float(c) for c in a.split(",")) for a in axes]
    payload: dict[str, Any] = {"eta": eta, "axes": vecs}
    if len(vecs) == 2:
        obs = [J.NoisySpinObservable(eta, v) for v in vecs]
        payload["pairwise_compatible"] = J.pairwise_compatible(*obs)
    payload["n_wise_necessary"] = J.n_wise_necessary(eta, vecs)
    payload["n_wise_sufficient"] = J.n_wise_sufficient(eta, vecs)
    keys = [k for k in ("pairwise_compatible", "n_wise_necessary", "n_wise_sufficient") if k in payload]
    emit(payload, fmt, output, (keys, [[payload[k] for k in keys]]))


def _realization(h) -> dict:
    from . import joint_measurability as J

    blocks = J.block_layout(h)
    povms = J.realize_hypergraph(h)
    recovered = J.recompute_hypergraph(povms, blocks)
    return {
        "dim": povms[0].dim,
        "blocks": [{"vertices": list(b.vertices), "offset": b.offset, "dim": b.dim, "eta": b.eta} for b in blocks],
        "povms": [p.to_json() for p in povms],
        "reproduces_input": recovered == h,
    }


@main.command()
@click.option("--hypergraph", type=click.Path(exists=True, dir_okay=False), required=False)
@common
def realize(hypergraph, seed, fmt, output, selftest):
    """Build POVMs whose compatibility pattern is the given hypergraph."""
    from . import joint_measurability as J

    if selftest:
        return run_selftest(_jm_checks())
    if not hypergraph:
        raise click.UsageError("--hypergraph is required")
    h = J.JmHypergraph.from_json(_load_json(hypergraph))
    payload = _realization(h)
    table = (["vertices", "offset", "dim", "eta"],
             [[" ".join(map(str, b["vertices"])), b["offset"], b["dim"], b["eta"]] for b in payload["blocks"]])
    emit(payload, fmt, output, table)


def _jm_checks():
    from . import joint_measurability as J
    from .quantum_core import clifford_generators

    def worked_example():
        h = J.JmHypergraph.from_edges(4, [(1, 2), (1, 4), (2, 3), (2, 4), (3, 4)])
        sets = J.find_minimal_incompatible_sets(h)
        povms = J.realize_hypergraph(h)
        return sets == [(1, 2, 4), (1, 3), (2, 3, 4)] and povms[0].dim == 6

    def specker():
        h = J.JmHypergraph.from_edges(3, [(1, 2), (2, 3), (1, 3)])
        blocks = J.block_layout(h)
        return len(blocks) == 1 and blocks[0].dim == 2 and abs(blocks[0].eta - 1 / math.sqrt(2)) < 1e-12

    return [
        ("worked example: minimal sets (1,2,4),(1,3),(2,3,4) on dimension 6", worked_example),
        ("Specker triangle realises on a qubit with eta = 1/sqrt(2)", specker),
        ("orthogonal pair threshold 1/sqrt(2)", lambda: J.pairwise_compatible(
            J.NoisySpinObservable(1 / math.sqrt(2), (1, 0, 0)), J.NoisySpinObservable(1 / math.sqrt(2), (0, 1, 0)))
            and not J.pairwise_compatible(
            J.NoisySpinObservable(0.71, (1, 0, 0)), J.NoisySpinObservable(0.71, (0, 1, 0)))),
        ("Clifford generators anticommute for n <= 9", lambda: all(not clifford_generators(n).violations() for n in range(1, 10))),
    ]


@main.command()
@click.option("--builtin", type=click.Choice(["cega18"]), default=None)
@click.option("--hypergraph", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON {n_classes, measurements}.")
@click.option("--report", type=click.Choice(["summary", "vertices", "colouring", "noise"]), default="summary",
              show_default=True)
@click.option("--p1", type=str, default="1", help="State visibility (noise report); rationals like 7/9 allowed.")
@click.option("--p2", type=str, default="1", help="Measurement visibility (noise report).")
@common
def ks(builtin, hypergraph, report, p1, p2, seed, fmt, output, selftest):
    """Event hypergraphs: colourability, assignment polytope, vertex classes, noise."""
    from . import ks_polytope as K

    if selftest:
        return run_selftest(_ks_checks())
    if builtin == "cega18":
        h = K.CEGA18
    elif hypergraph:
        h = K.EventHypergraph.from_json(_load_json(hypergraph))
    else:
        raise click.UsageError("give --builtin or --hypergraph")

    if report == "colouring":
        ok, colouring = K.ks_colourable(h)
        payload = {"ks_colourable": ok, "colouring": list(colouring) if colouring else None}
        return emit(payload, fmt, output, (["ks_colourable"], [[ok]]))
    if report == "noise":
        a, b = Fraction(p1), Fraction(p2)
        value = K.depolarizing_A(a, b)
        payload = {"p1": a, "p2": b, "A": value, "bound": Fraction(5, 6), "threshold_p1p2": K.noise_threshold(),
                   "violated": value > Fraction(5, 6)}
        return emit(payload, fmt, output, (["p1", "p2", "A", "violated"], [[a, b, value, payload["violated"]]]))

    from .polytope_engine import enumerate_vertices

    vs = enumerate_vertices(K.assignment_polytope(h))
    types = K.classify_vertices(h, vs) if report == "vertices" else None
    best, witness = K.max_avg_predictability(h, vs)
    payload: dict[str, Any] = {"count": len(vs), "max_avg_predictability": best, "witness": list(witness)}
    if types is not None:
        hist: dict[int, int] = {}
        for t in types:
            hist[t.type_id] = hist.get(t.type_id, 0) + 1
        payload["type_histogram"] = [hist[k] for k in sorted(hist)]
        payload["type_values"] = sorted({t.avg_predictability for t in types}, reverse=True)
        payload["vertices"] = [
            {"vertex": [f"{x.numerator}/{x.denominator}" for x in t.vertex], "type": t.type_id,
             "odd_cycle": list(t.odd_cycle)} for t in types
        ]
        header = [f"w{k}" for k in range(1, h.n_classes + 1)] + ["type", "avg_predictability", "odd_cycle"]
        rows = [list(t.vertex) + [t.type_id, t.avg_predictability, " ".join(map(str, t.odd_cycle))] for t in types]
        return emit(payload, fmt, output, (header, rows))
    emit(payload, fmt, output, (["count", "max_avg_predictability"], [[len(vs), best]]))


def _ks_checks():
    from . import ks_polytope as K
    from .polytope_engine import enumerate_vertices

    def cega():
        vs = enumerate_vertices(K.assignment_polytope(K.CEGA18))
        types = K.classify_vertices(K.CEGA18, vs)
        hist = [sum(t.type_id == k for t in types) for k in (1, 2, 3, 4)]
        return len(vs) == 146 and hist == [24, 36, 36, 50]

    return [
        ("18-ray hypergraph is not KS-colourable", lambda: not K.ks_colourable(K.CEGA18)[0]),
        ("146 vertices with type histogram (24, 36, 36, 50)", cega),
        ("max average predictability 5/6", lambda: K.max_avg_predictability(K.CEGA18)[0] == Fraction(5, 6)),
        ("noise threshold p1 p2 = 7/9", lambda: K.noise_threshold() == Fraction(7, 9)),
        ("ideal quantum statistics give A = 1", lambda: abs(K.evaluate_A(K.CEGA18, K.cega18_quantum_stats()) - 1) < 1e-12),
    ]


@main.command()
@click.option("--eta", type=float, default=None, help="Sharpness for bounds and the trine violation.")
@click.option("--stats", "stats_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON {p: [p1,p2,p3], w: [w12,w23,w13]} to test against the KS inequalities.")
@click.option("--report", type=click.Choice(["stats", "vertices", "bounds"]), default=None)
@common
def specker(eta, stats_path, report, seed, fmt, output, selftest):
    """Three pairwise-compatible binary measurements."""
    from . import specker_ncycle as S

    if selftest:
        return run_selftest(_specker_checks())
    if report is None:
        report = "stats" if stats_path else ("bounds" if eta is not None else "vertices")
    if report == "vertices":
        vs = S.specker_vertices()
        payload = {"count": len(vs), "vertices": [[f"{x.numerator}/{x.denominator}" for x in v] for v in vs]}
        return emit(payload, fmt, output, ([f"x{k}" for k in range(1, vs.dim + 1)], [list(v) for v in vs]))
    if report == "stats":
        if not stats_path:
            raise click.UsageError("--stats is required for the stats report")
        obj = _load_json(stats_path)
        s = S.PairwiseStats(tuple(obj["p"]), tuple(obj["w"]))
        s.validate()
        ineq = S.ks_inequalities(s)
        joint = S.fine_joint_distribution(s)
        payload = {"ks_inequalities": dict(zip(S.KS_NAMES, ineq)),
                   "joint_exists": not isinstance(joint, S.NoJoint),
                   "joint": None if isinstance(joint, S.NoJoint) else {"".join(map(str, k)): v for k, v in joint.items()}}
        return emit(payload, fmt, output, (list(S.KS_NAMES) + ["joint_exists"], [list(ineq) + [payload["joint_exists"]]]))
    if eta is None:
        raise click.UsageError("--eta is required for the bounds report")
    payload = {"eta": eta, "lsw_bound": S.lsw_bound(eta), "R0R1R2_bounds": S.nc_bounds_R0R1R2(eta)}
    if eta <= 2 / 3 + 1e-12:
        payload["trine_cmax"] = S.cmax_coplanar(eta, [-0.5, -0.5, -0.5])
        payload["trine_violation_born"] = S.trine_violation_born(eta)
    emit(payload, fmt, output, (["eta", "lsw_summed", "lsw_averaged"],
                                [[eta, payload["lsw_bound"]["summed"], payload["lsw_bound"]["averaged"]]]))


def _specker_checks():
    from . import specker_ncycle as S

    vs = None

    def twelve():
        nonlocal vs
        vs = S.specker_vertices()
        det = sum(all(x in (0, 1) for x in v) for v in vs)
        return len(vs) == 12 and det == 8

    return [
        ("12 vertices, 8 deterministic", twelve),
        ("trine C_max at eta = 2/3 is sqrt(13)/3 - 1",
         lambda: abs(S.cmax_coplanar(2 / 3, [-0.5, -0.5, -0.5]) - (math.sqrt(13) / 3 - 1)) < 1e-9),
        ("Born-rule trine violation matches the closed form",
         lambda: abs(S.trine_violation_born(2 / 3) - (math.sqrt(13) / 3 - 1)) < 1e-6),
    ]


@main.command()
@click.option("--n", "n", type=int, default=None, help="Number of measurements in the cycle.")
@click.option("--eta0", type=float, default=None, help="Sharpness; omit to optimise the violation.")
@click.option("--curve", is_flag=True, help="Plot-ready samples of witness, bound and Q_viol over eta0.")
@click.option("--steps", type=int, default=200, show_default=True)
@common
def ncycle(n, eta0, curve, steps, seed, fmt, output, selftest):
    """n-cycle scenario: quantum witness, noncontextual bound and violation."""
    from . import specker_ncycle as S

    if selftest:
        return run_selftest(_ncycle_checks())
    if n is None:
        raise click.UsageError("--n is required")
    if n < 3:
        raise click.BadParameter("n must be at least 3", param_hint="--n")
    up = S.eta0_upper(n)
    if curve:
        rows = []
        for k in range(steps + 1):
            x = up * k / steps
            w = S.witness_closed_form(n, x)
            rows.append([x, w, w - S.qviol(n, x), S.qviol(n, x)])
        payload = {"n": n, "columns": ["eta0", "witness", "nc_bound", "q_viol"], "rows": rows}
        return emit(payload, fmt, output, (payload["columns"], rows))
    if eta0 is None:
        best, q, crit, up = S.optimize_qviol(n)
        payload = {"n": n, "optimal_eta0": best, "q_viol": q, "critical_eta0": crit, "upper_eta0": up}
        return emit(payload, fmt, output, (list(payload), [list(payload.values())]))
    rep = S.quantum_witness_ncycle(S.NCycleQuantumConfig(n, eta0))
    payload = {"n": n, "eta0": eta0, "witness": rep.witness_value, "nc_bound": rep.nc_bound,
               "eta_ave": rep.eta_ave, "violated": rep.violated, "q_viol": rep.witness_value - rep.nc_bound}
    emit(payload, fmt, output, (list(payload), [list(payload.values())]))


def _ncycle_checks():
    from . import specker_ncycle as S

    def n3():
        best, q, crit, up = S.optimize_qviol(3)
        return all(abs(a - b) < 1e-3 for a, b in zip((q, best, crit, up), (0.1793, 0.4566, 0.6981, 0.7320)))

    return [
        ("n = 3 row (0.1793, 0.4566, 0.6981, 0.7320)", n3),
        ("12 vertices of the 3-cycle polytope", lambda: len(S.ncycle_polytope(3)) == 12),
        ("Born-rule witness equals the closed form at n = 5",
         lambda: abs(S.quantum_witness_ncycle(S.NCycleQuantumConfig(5, 0.5)).witness_value
                     - S.witness_closed_form(5, 0.5)) < 1e-9),
    ]


@main.command("qviol-table")
@click.option("--n", "n_list", type=str, default="3..14,99,100,199,200", show_default=True)
@common
def qviol_table(n_list, seed, fmt, output, selftest):
    """Maximum violation, optimal and critical eta0, and the eta0 upper bound per n."""
    from . import specker_ncycle as S

    if selftest:
        return run_selftest(_ncycle_checks())
    ns = parse_n_list(n_list)
    rows = []
    for n in ns:
        best, q, crit, up = S.optimize_qviol(n)
        rows.append([n, q, best, crit, up])
    header = ["n", "q_viol", "optimal_eta0", "critical_eta0", "upper_eta0"]
    emit({"columns": header, "rows": rows}, fmt, output, (header, rows))


@main.command()
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Raw data CSV (labels header, then 'f;df' cells).")
@click.option("--synthetic", is_flag=True, help="Generate Poisson data for the trine configuration.")
@click.option("--p1", type=float, default=0.995, show_default=True)
@click.option("--p2", type=float, default=0.995, show_default=True)
@click.option("--counts", type=int, default=100_000, show_default=True)
@click.option("--m-t", "m_t", type=int, default=3, show_default=True)
@click.option("--model", type=click.Choice(["noncontextual", "measurement_contextual"]), default=None,
              help="Evaluate a built-in operational table instead of data.")
@common
def fcf(input_path, synthetic, p1, p2, counts, m_t, model, seed, fmt, output, selftest):
    """Fair-coin-flip witness: GPT fit, exact secondary procedures, A'."""
    from . import gpt_fit as G

    if selftest:
        return run_selftest(_fcf_checks())
    if model:
        s = G.fixture_to_secondary(G.fcf_fixture_models()[model])
        a = G.fcf_a_prime_exact(s)
        payload = {"model": model, "A_prime": a, "nc_bound": G.FCF_BOUND, "violated": a > G.FCF_BOUND}
        return emit(payload, fmt, output, (["A_prime", "nc_bound", "violated"], [[a, G.FCF_BOUND, payload["violated"]]]))
    if input_path:
        with open(input_path, encoding="utf-8") as fh:
            raw = G.RawDataMatrix.from_csv(fh.read())
    elif synthetic:
        raw = G.synthesize_raw_data(G.FcfQuantumConfig(p1, p2, counts), seed=seed)
    else:
        raise click.UsageError("give --input, --synthetic or --model")
    result = G.run_fcf_pipeline(raw, m_t=m_t, seed=seed)
    payload = {k: result[k] for k in ("chi2", "hyperplanes", "C_P", "C_M", "A_prime", "nc_bound", "violated")}
    keys = ["chi2", "C_P", "C_M", "A_prime", "nc_bound", "violated"]
    emit(payload, fmt, output, (keys, [[payload[k] for k in keys]]))


def _fcf_checks():
    from . import gpt_fit as G
    from .polytope_engine import HPolytope, enumerate_vertices

    def models():
        m = G.fcf_fixture_models()
        return (G.fcf_a_prime_exact(G.fixture_to_secondary(m["noncontextual"])) == Fraction(5, 6)
                and G.fcf_a_prime_exact(G.fixture_to_secondary(m["measurement_contextual"])) == Fraction(9, 10))

    def ideal():
        r = G.run_fcf_pipeline(G.synthesize_raw_data(G.FcfQuantumConfig(1, 1, None)))
        return abs(float(r["A_prime"]) - 1) < 1e-10

    def polygon():
        vs = enumerate_vertices(HPolytope.from_rows([[1, 1, 1]], [Fraction(3, 2)], dim=3))
        return len(vs) == 6

    return [
        ("noncontextual table gives A' = 5/6 and the PNC-MC table 9/10", models),
        ("ideal trine configuration gives A' = 1", ideal),
        ("fair-coin assignment polygon has 6 vertices", polygon),
    ]


@main.command()
@common
def chsh(seed, fmt, output, selftest):
    """Optimal qubit CHSH setup: correlator value and game win probability."""
    from .quantum_core import chsh_optimal_setup, chsh_value, chsh_win_probability

    if selftest:
        return run_selftest([
            ("CHSH value 2 sqrt(2)", lambda: abs(chsh_value(*chsh_optimal_setup()) - 2 * math.sqrt(2)) < 1e-10),
            ("win probability cos^2(pi/8)",
             lambda: abs(chsh_win_probability(*chsh_optimal_setup()) - math.cos(math.pi / 8) ** 2) < 1e-10),
        ])
    setup = chsh_optimal_setup()
    payload = {"chsh_value": chsh_value(*setup), "win_probability": chsh_win_probability(*setup),
               "local_bound": 2, "tsirelson_bound": 2 * math.sqrt(2)}
    emit(payload, fmt, output, (list(payload), [list(payload.values())]))


# ---------------------------------------------------------------------------
# entry point


def run(argv: list[str] | None = None) -> int:
    """Invoke the CLI and return its exit code instead of exiting."""
    try:
        main.main(args=argv, prog_name="contextlab", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except ContextLabError as exc:
        click.echo(json.dumps(exc.to_dict(), sort_keys=True))
        return 2
    except (ValueError, ZeroDivisionError) as exc:
        click.echo(json.dumps({"error": "invalid_value", "type": type(exc).__name__, "message": str(exc)}, sort_keys=True))
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    return 0


def console_main() -> None:
    sys.exit(run())
