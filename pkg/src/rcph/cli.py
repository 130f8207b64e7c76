"""Batch command-line interface.

Subcommands: analyze, sweep, synth, simulate, enroll, query, serve, best-p.
Exit codes: 0 success, 1 usage error, 2 data error (unreadable/malformed
inputs). The default seed is 42, overridable by --seed or the RCPH_SEED
environment variable.

Engine-backed subcommands import their modules lazily so that pure analysis
commands never pay the jit backend's import cost.
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction

from . import bounds
from .core import DEFAULT_N, FormatError, RcphParams


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1 (argparse's default is 2, which we reserve for data errors)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _env_seed() -> int:
    try:
        return int(os.environ.get("RCPH_SEED", "42"))
    except ValueError:
        return 42


def _parse_p(text: str) -> Fraction:
    try:
        p = Fraction(text)
    except (ValueError, ZeroDivisionError) as e:
        raise argparse.ArgumentTypeError(f"bad p value {text!r}") from e
    if not 0 < p <= 1:
        raise argparse.ArgumentTypeError(f"p must be in (0, 1], got {text}")
    return p


def _parse_p_grid(text: str) -> list[Fraction]:
    """start:stop:step with decimal fields, stop inclusive."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("p grid must be start:stop:step")
    try:
        start, stop, step = (Fraction(x) for x in parts)
    except (ValueError, ZeroDivisionError) as e:
        raise argparse.ArgumentTypeError(f"bad p grid {text!r}") from e
    if step <= 0 or start <= 0 or stop < start or stop > 1:
        raise argparse.ArgumentTypeError(f"bad p grid {text!r}")
    out = []
    p = start
    while p <= stop:
        out.append(p)
        p += step
    return out


def _parse_m_grid(text: str) -> list[int]:
    try:
        ms = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bad m grid {text!r}") from e
    if not ms or any(m < 1 for m in ms):
        raise argparse.ArgumentTypeError(f"bad m grid {text!r}")
    return ms


def _parse_addr(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep:
        raise argparse.ArgumentTypeError("address must be host:port")
    try:
        return host or "127.0.0.1", int(port)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bad port in {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="rcph", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--seed", type=int, default=_env_seed())
        return sp

    sp = add("analyze", "per-row and aggregate bounds for a distance matrix")
    sp.add_argument("--dist-matrix", required=True)
    sp.add_argument("--p", type=_parse_p, required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--n", type=int, default=DEFAULT_N)

    sp = add("sweep", "bounds surface over a (p, m) grid, to CSV")
    sp.add_argument("--dist-matrix", required=True)
    sp.add_argument("--p-grid", type=_parse_p_grid, required=True)
    sp.add_argument("--m-grid", type=_parse_m_grid, required=True)
    sp.add_argument("--n", type=int, default=DEFAULT_N)
    sp.add_argument("--out", required=True)

    sp = add("synth", "synthesize a fixture realizing one distance-matrix row")
    sp.add_argument("--dist-matrix", required=True)
    sp.add_argument("--n", type=int, default=DEFAULT_N)
    sp.add_argument("--row", type=int, default=0)
    sp.add_argument("--out", required=True)

    sp = add("simulate", "Monte-Carlo outcome rates for a fixture")
    sp.add_argument("--fixture", required=True)
    sp.add_argument("--p", type=_parse_p, required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--trials", type=int, required=True)

    sp = add("enroll", "preprocess anchors into an index file")
    sp.add_argument("--anchors", required=True)
    sp.add_argument("--p", type=_parse_p, required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--out", required=True)

    sp = add("query", "match a probe against an index")
    sp.add_argument("--index", required=True)
    sp.add_argument("--probe", required=True)

    sp = add("serve", "run the authentication service")
    sp.add_argument("--listen", type=_parse_addr, required=True)
    sp.add_argument("--store", required=True)

    sp = add("best-p", "grid-search p maximizing aggregate accuracy")
    sp.add_argument("--dist-matrix", required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--n", type=int, default=DEFAULT_N)
    sp.add_argument("--p-grid", type=_parse_p_grid, default=None)

    return ap


def _records_with_truth(path):
    records = bounds.read_distance_csv(path)
    for r in records:
        if r.correct_index is None:
            raise FormatError("row without correct index (need ground truth)")
    return records


def _fmt(x: float) -> str:
    return repr(float(x))


def cmd_analyze(args) -> int:
    records = _records_with_truth(args.dist_matrix)
    params = RcphParams(p=args.p, m=args.m, n=args.n, k=records[0].k)
    print("row,accuracy,fail,complexity")
    for i, r in enumerate(records):
        b = bounds.performance_bounds(r, params)
        print(f"{i},{_fmt(b.accuracy_lower)},{_fmt(b.fail_upper)},"
              f"{_fmt(b.expected_iterations_upper)}")
    agg = bounds.aggregate(records, params)
    print(f"aggregate,{_fmt(agg.accuracy_lower)},{_fmt(agg.fail_upper)},"
          f"{_fmt(agg.expected_iterations_upper)}")
    return 0


def cmd_sweep(args) -> int:
    from . import simlab

    records = _records_with_truth(args.dist_matrix)
    rows = simlab.sweep(records, args.p_grid, args.m_grid, n=args.n)
    simlab.write_sweep_csv(args.out, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_synth(args) -> int:
    from . import simlab

    records = _records_with_truth(args.dist_matrix)
    if not 0 <= args.row < len(records):
        raise FormatError(f"row {args.row} out of range (matrix has {len(records)})")
    fixture = simlab.synth_fixture(records[args.row], args.n, args.seed)
    simlab.write_fixture(args.out, fixture)
    print(f"wrote fixture ({records[args.row].k} anchors, n={args.n}) to {args.out}")
    return 0


def cmd_simulate(args) -> int:
    from . import simlab

    fixture = simlab.read_fixture(args.fixture)
    n = fixture.query.n
    params = RcphParams(p=args.p, m=args.m, n=n, k=fixture.record.k)
    st = simlab.monte_carlo(fixture, params, args.trials, args.seed)
    print("trials,correct,wrong,abstain,mean_iterations,se_correct,se_wrong,se_abstain")
    print(f"{st.trials},{_fmt(st.correct_rate)},{_fmt(st.wrong_rate)},"
          f"{_fmt(st.abstain_rate)},{_fmt(st.mean_iterations)},"
          f"{_fmt(st.se_correct)},{_fmt(st.se_wrong)},{_fmt(st.se_abstain)}")
    return 0


def cmd_enroll(args) -> int:
    from . import engine
    from .core import read_embeddings

    recs = read_embeddings(args.anchors)
    labels = [lab for lab, _ in recs]
    anchors = [e for _, e in recs]
    params = RcphParams(p=args.p, m=args.m, n=anchors[0].n, k=len(anchors))
    idx = engine.preprocess(anchors, params, args.seed, labels=labels)
    engine.write_index(args.out, idx)
    print(f"enrolled {len(anchors)} anchors (m={args.m}, s={params.s}) to {args.out}")
    return 0


def cmd_query(args) -> int:
    from . import engine
    from .core import read_embeddings

    idx = engine.read_index(args.index)
    probe = read_embeddings(args.probe)[0][1]
    out = engine.query(idx, probe)
    if out.is_match:
        print(f"match,{idx.labels[out.class_index]},{out.iterations_used}")
    else:
        print(f"abstain,,{out.iterations_used}")
    return 0


def cmd_serve(args) -> int:
    from . import auth

    store = auth.UserStore(args.store)
    server = auth.AuthServer(args.listen, store)
    host, port = server.server_address[:2]
    print(f"auth service on {host}:{port}, store {args.store} "
          f"({len(store)} users)", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        server.server_close()
    return 0


def cmd_best_p(args) -> int:
    records = _records_with_truth(args.dist_matrix)
    p_star, agg = bounds.best_p(records, args.m, p_grid=args.p_grid, n=args.n)
    print("p,accuracy,fail,complexity")
    print(f"{float(p_star)!r},{_fmt(agg.accuracy_lower)},{_fmt(agg.fail_upper)},"
          f"{_fmt(agg.expected_iterations_upper)}")
    return 0


_COMMANDS = {
    "analyze": cmd_analyze,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
    "simulate": cmd_simulate,
    "enroll": cmd_enroll,
    "query": cmd_query,
    "serve": cmd_serve,
    "best-p": cmd_best_p,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except FileNotFoundError as e:
        print(f"rcph: cannot read {e.filename}", file=sys.stderr)
        return 2
    except (FormatError, ValueError, OSError) as e:
        print(f"rcph: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
