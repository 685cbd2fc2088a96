"""``metric-ext`` command line.

Exit codes: 0 success, 1 domain error (bad data, failed verification,
solver failure), 2 usage error.  Every JSON output carries a ``provenance``
block with the config and seed used.
"""

import argparse
import csv
import sys

import numpy as np

from .errors import MetricExtError
from .geometry import MappedPairs, PointSet, distortion_report
from .io import Config, parse_pairs, parse_pointset, provenance, write_json
from .jl import DEFAULT_C_JL, JlProjection, jl_embed

SCHEMAS = """file formats:
  points  {"dim": d, "points": [[x1, .., xd], ...]}   (a bare list of rows also works)
  pairs   {"source": <points>, "image": <points>}     (row i of source maps to row i of image)
"""


def _report_json(rep):
    return {
        "lipschitz": rep.lipschitz,
        "inverse_lipschitz": rep.inverse_lipschitz,
        "distortion": rep.distortion,
        "witness_expand": rep.witness_expand,
        "witness_contract": rep.witness_contract,
    }


def _config(args, seed=None):
    s = seed if seed is not None else getattr(args, "seed", None)
    return Config(seed=0 if s is None else int(s), c_jl=float(getattr(args, "c_jl", None) or DEFAULT_C_JL))


def cmd_jl(args):
    cfg = _config(args)
    pts = parse_pointset(args.input)
    proj, images = jl_embed(pts, args.eps, cfg.seed, args.max_retries, cfg.c_jl)
    rep = distortion_report(MappedPairs(pts, images)) if len(pts) > 1 else None
    out = {
        "provenance": provenance("jl", cfg, eps=args.eps, max_retries=args.max_retries),
        "kind": "jl",
        "projection": proj.to_json(),
        "images": images,
        "report": _report_json(rep) if rep else None,
    }
    write_json(out, args.out)


def cmd_extend(args):
    from .outer import build_outer_extension

    cfg = _config(args)
    pairs = parse_pairs(args.input)
    queries = parse_pointset(args.points)
    ext = build_outer_extension(pairs, tol=args.tol)
    stats = {}
    images = ext.evaluate_many(queries.points, consistency=args.consistency, stats=stats)
    out = {
        "provenance": provenance("extend", cfg, tol=args.tol, consistency=args.consistency),
        "kind": "outer_extension",
        "pairs": pairs,
        "queries": queries,
        "images": images,
        "output_dim": ext.output_dim,
        "forward_lipschitz": ext.forward_L,
        "alpha": ext.alpha,
        "input_distortion": ext.report.distortion,
        "distortion_bound": ext.distortion_bound,
        "solver_stats": stats,
    }
    write_json(out, args.out)


def _parse_point(text):
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise MetricExtError(f"--point must be comma-separated numbers, got {text!r}") from None


def cmd_extend_point(args):
    from .outer import OnePointParams, one_point_extend, one_point_extend_barycentric

    cfg = _config(args)
    pairs = parse_pairs(args.input)
    u = _parse_point(args.point)
    params = OnePointParams(eps=args.eps, strategy=args.strategy)
    fn = one_point_extend if args.strategy == "feasibility" else one_point_extend_barycentric
    res = fn(pairs, u, params)
    out = {
        "provenance": provenance("extend-point", cfg, eps=args.eps, strategy=args.strategy),
        "kind": "one_point_extension",
        "pairs": pairs,
        "point": u,
        "image": res.point,
        "sq_error_ratio": res.sq_error_ratio,
        "bound": res.bound,
        "within_bound": res.within_bound,
        "min_ratio": res.min_ratio,
        "max_ratio": res.max_ratio,
    }
    write_json(out, args.out)


def cmd_terminal_build(args):
    from .terminal import build_terminal_embedder

    cfg = _config(args)
    T = parse_pointset(args.input)
    emb = build_terminal_embedder(T, args.eps, cfg.seed, cfg.c_jl, args.max_retries)
    out = {"provenance": provenance("terminal build", cfg, eps=args.eps), "kind": "terminal", **emb.to_json()}
    write_json(out, args.out)


def _load_terminal(path):
    import json

    from .terminal import TerminalEmbedder

    with open(path) as fh:
        obj = json.load(fh)
    return TerminalEmbedder.from_json(obj), obj.get("provenance", {})


def cmd_terminal_query(args):
    from .terminal import embed_queries

    emb, prov = _load_terminal(args.emb)
    cfg = Config.from_json(prov.get("config", {}))
    Q = parse_pointset(args.input)
    images, stats = embed_queries(emb, Q.points)
    out = {
        "provenance": provenance("terminal query", cfg, embedder=args.emb),
        "kind": "terminal_queries",
        "queries": Q,
        "images": images,
        "stats": {"n_queries": stats.n_queries, "min_ratio": stats.min_ratio,
                  "max_ratio": stats.max_ratio, "violations": stats.violations},
    }
    write_json(out, args.out)
    return 1 if stats.violations else 0


def cmd_prioritized(args):
    from .prioritized import PriorityRanking, build_prioritized

    cfg = _config(args)
    pts = parse_pointset(args.input)
    if args.ranking:
        import json

        with open(args.ranking) as fh:
            ranking = PriorityRanking(tuple(json.load(fh)))
    else:
        ranking = PriorityRanking.identity(len(pts))
    emb = build_prioritized(pts, ranking, args.eps, args.variant, cfg.seed, cfg.c_jl, args.max_retries)
    out = {
        "provenance": provenance("prioritized", cfg, eps=args.eps, variant=args.variant),
        "kind": "prioritized",
        "ranking": list(ranking.order),
        "levels": emb.level_table(),
        "images": emb.final_images(),
    }
    write_json(out, args.out)


def cmd_line_extend(args):
    from .line import build_line_extension

    cfg = _config(args)
    pairs = parse_pairs(args.input)
    curve = build_line_extension(pairs, args.eps)
    out = {"provenance": provenance("line-extend", cfg, eps=args.eps), **curve.to_json()}
    write_json(out, args.out)


def cmd_spiral(args):
    from .line import spiral_eval

    t = np.linspace(args.lo, args.hi, args.samples)
    xy = spiral_eval(t, args.eps)
    fh = sys.stdout if args.emit_csv == "-" else open(args.emit_csv, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "y"])
        for ti, (x, y) in zip(t, xy):
            w.writerow([repr(float(ti)), repr(float(x)), repr(float(y))])
    finally:
        if fh is not sys.stdout:
            fh.close()


def _verify_line(obj, pairs, args):
    from .harness import sampled_distortion
    from .line import build_line_extension

    src = MappedPairs(np.asarray(obj["source"])[:, None], np.asarray(obj["image"])[:, None])
    curve = build_line_extension(src, float(obj["eps"]))
    vals = curve(pairs.X[:, 0])
    err = float(np.abs(vals[:, 0] - pairs.Y[:, 0]).max() + np.abs(vals[:, 1]).max())
    lo, hi = curve.interval
    w = max(hi - lo, 1.0)
    sd = sampled_distortion(curve, (lo - w, hi + w), args.samples, args.seed)
    return {"max_pair_error": err, "sampled_distortion": sd.distortion, "max_expansion": sd.max_expansion,
            "max_contraction": sd.max_contraction, "ok": err <= 1e-9 * max(1.0, float(np.abs(pairs.Y).max()))}


def _verify_images(source, images, pairs):
    """Distortion of source -> images and agreement with ``pairs`` on shared rows."""
    lookup = {row.tobytes(): i for i, row in enumerate(source)}
    err = 0.0
    for x, y in zip(pairs.X, pairs.Y):
        i = lookup.get(np.ascontiguousarray(x).tobytes())
        if i is None:
            raise MetricExtError("a pairs source point is missing from the map's domain")
        pad = np.zeros(images.shape[1])
        pad[: len(y)] = y
        err = max(err, float(np.abs(images[i] - pad).max()))
    rep = distortion_report(MappedPairs(source, images))
    return err, rep


def cmd_verify(args):
    import json

    with open(args.map) as fh:
        obj = json.load(fh)
    pairs = parse_pairs(args.pairs)
    kind = obj.get("kind")
    cfg = Config.from_json(obj.get("provenance", {}).get("config", {}))
    if kind == "line_extension":
        result = _verify_line(obj, pairs, args)
    elif kind == "jl":
        proj = JlProjection.from_json(obj["projection"])
        got = proj.apply(pairs.X)
        err = float(np.abs(got - pairs.Y).max()) if got.shape == pairs.Y.shape else np.inf
        rep = distortion_report(MappedPairs(pairs.source, PointSet(got)))
        eps = float(obj["projection"]["eps"])
        result = {"max_pair_error": err, "report": _report_json(rep),
                  "ok": err <= 1e-9 and rep.distortion <= 1 + eps + 1e-12}
    elif kind == "outer_extension":
        src = np.vstack([np.asarray(obj["pairs"]["source"]["points"]), np.asarray(obj["queries"]["points"])])
        base = np.asarray(obj["pairs"]["image"]["points"])
        imgs = np.vstack([np.hstack([base, np.zeros((len(base), src.shape[1]))]), np.asarray(obj["images"])])
        err, rep = _verify_images(src, imgs, pairs)
        result = {"max_pair_error": err, "report": _report_json(rep),
                  "ok": err <= 1e-12 and rep.distortion <= float(obj["distortion_bound"]) * (1 + 1e-6)}
    elif "images" in obj and "source" in obj:
        err, rep = _verify_images(np.asarray(obj["source"]), np.asarray(obj["images"]), pairs)
        result = {"max_pair_error": err, "report": _report_json(rep), "ok": err <= 1e-12}
    else:
        raise MetricExtError(f"cannot verify a map of kind {kind!r}")
    write_json({"provenance": provenance("verify", cfg, map=args.map, pairs=args.pairs), **result}, args.out)
    return 0 if result["ok"] else 1


def cmd_lowerbound(args):
    from .harness import one_point_lb_check, spiral_lb_check

    if args.which == "one-point":
        val = one_point_lb_check(args.eps, args.restarts, args.seed)
    else:
        val = spiral_lb_check(args.k, args.restarts, args.seed)
    print(repr(float(val)))


def _seed(p, required):
    p.add_argument("--seed", type=int, required=required, default=None if required else 0,
                   help="RNG seed" + (" (required)" if required else " (default 0)"))


def build_parser():
    p = argparse.ArgumentParser(prog="metric-ext", description=__doc__.splitlines()[0], epilog=SCHEMAS,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("jl", help="verified JL projection of a point set", epilog=SCHEMAS,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--eps", type=float, required=True)
    _seed(s, True)
    s.add_argument("--c-jl", type=float, default=DEFAULT_C_JL)
    s.add_argument("--max-retries", type=int, default=3)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_jl)

    s = sub.add_parser("extend", help="whole-space outer extension evaluated at query points")
    s.add_argument("--in", dest="input", required=True, help="pairs file")
    s.add_argument("--points", required=True, help="query points file")
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--consistency", choices=["auto", "full", "local", "none"], default="auto")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_extend)

    s = sub.add_parser("extend-point", help="one-point extension of a near-isometry")
    s.add_argument("--in", dest="input", required=True, help="pairs file")
    s.add_argument("--point", required=True, help="comma-separated coordinates")
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--strategy", choices=["feasibility", "barycentric"], default="feasibility")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_extend_point)

    s = sub.add_parser("terminal", help="terminal dimension reduction")
    tsub = s.add_subparsers(dest="action", required=True)
    b = tsub.add_parser("build")
    b.add_argument("--in", dest="input", required=True, help="terminals file")
    b.add_argument("--eps", type=float, required=True)
    _seed(b, True)
    b.add_argument("--c-jl", type=float, default=DEFAULT_C_JL)
    b.add_argument("--max-retries", type=int, default=3)
    b.add_argument("--out", default="-")
    b.set_defaults(func=cmd_terminal_build)
    q = tsub.add_parser("query")
    q.add_argument("--emb", required=True, help="embedder file written by 'terminal build'")
    q.add_argument("--in", dest="input", required=True, help="query points file")
    q.add_argument("--out", default="-")
    q.set_defaults(func=cmd_terminal_query)

    s = sub.add_parser("prioritized", help="prioritized dimension reduction")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--eps", type=float, required=True)
    _seed(s, True)
    s.add_argument("--variant", default="loglog", help="'loglog' or 'k=K'")
    s.add_argument("--ranking", help="JSON list: point indices in priority order")
    s.add_argument("--c-jl", type=float, default=DEFAULT_C_JL)
    s.add_argument("--max-retries", type=int, default=3)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_prioritized)

    s = sub.add_parser("line-extend", help="continuous extension of a 1D near-isometry into the plane")
    s.add_argument("--in", dest="input", required=True, help="pairs file, both sides 1D")
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_line_extend)

    s = sub.add_parser("spiral", help="sample the spiral as CSV rows t,x,y")
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--samples", type=int, default=4096)
    s.add_argument("--lo", type=float, default=-2.0)
    s.add_argument("--hi", type=float, default=2.0)
    s.add_argument("--emit-csv", default="-")
    s.set_defaults(func=cmd_spiral)

    s = sub.add_parser("verify", help="check a map file against pairs")
    s.add_argument("--map", required=True)
    s.add_argument("--pairs", required=True)
    s.add_argument("--samples", type=int, default=100_000)
    _seed(s, False)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("lowerbound", help="numeric lower-bound checks")
    s.add_argument("which", choices=["one-point", "spiral"])
    s.add_argument("--eps", type=float, default=1e-4, help="one-point instance parameter")
    s.add_argument("--k", type=int, default=12, help="spiral instance: eps = 2^-k")
    s.add_argument("--restarts", type=int, default=32)
    _seed(s, False)
    s.set_defaults(func=cmd_lowerbound)
    return p


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    try:
        rc = args.func(args)
    except MetricExtError as e:
        print(f"metric-ext: error: {e}", file=sys.stderr)
        return 1
    return int(rc or 0)


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
