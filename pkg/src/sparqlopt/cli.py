"""Command-line entry point: evaluate, decide membership, rewrite, optimize,
translate, analyze constraints and generate reduction instances.

Exit status is 0 on success, 1 on a negative answer (membership false, rule
not applicable, translation undefined, generated instance mismatch) and 2 on
errors.
"""
from __future__ import annotations

import argparse
import contextlib
import io
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import NamedTuple, Sequence

from . import reductions as red
from . import syntax as sx
from .algebra import evaluate, format_mappings, membership, parse_mapping, translate
from .chase import chase
from .cq import (Undefined, c1_inverse, c1_translate, c2_inverse, c2_translate, format_constraints, freeze,
                 parse_constraints, parse_cq, sigma_prime)
from .rdf import parse_document, serialize_document
from .rewrite import LR, RL, RewriteTrace, RuleId, Step, extract_negation, normalize_filters, replace, rewrite_at
from .rewrite import applicable_sites, subtree
from .sqo import optimize
from .termination import CONDITIONS, analyze

OK, NEGATIVE, ERROR = 0, 1, 2


class CliResult(NamedTuple):
    status: int
    output: str
    errors: str = ""


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    n = int(text)
    if n <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return n


def _non_negative(text: str) -> int:
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["pretty", "structured"], default="pretty")
    common.add_argument("--seed", type=int, default=0, help="seed for all randomized document generation")
    common.add_argument("--budget", type=_positive, help="chase step budget")
    common.add_argument("--jobs", type=_positive, default=1, help="worker processes where supported")
    common.add_argument("--trace", action="store_true", help="print chase steps")

    p = _Parser(prog="sparqlopt", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("eval", parents=[common], help="evaluate a query over a document")
    s.add_argument("--data", required=True)
    s.add_argument("--query", required=True)

    s = sub.add_parser("member", parents=[common], help="decide whether a mapping is in a query result")
    s.add_argument("--data", required=True)
    s.add_argument("--query", required=True)
    s.add_argument("--mapping", required=True, help="inline '{?a -> 1}' or a file holding one")

    s = sub.add_parser("rewrite", parents=[common], help="apply an algebraic rule or strategy")
    s.add_argument("--query", required=True)
    s.add_argument("--rule", choices=[r.value for r in RuleId])
    s.add_argument("--direction", choices=[LR, RL])
    s.add_argument("--site", help="child indices from the root, e.g. 0,1; default: first applicable site")
    s.add_argument("--strategy", choices=["normalize-filters", "extract-negation"])
    s.add_argument("--data", help="also evaluate both sides on this document")

    s = sub.add_parser("optimize", parents=[common], help="semantic optimization under constraints")
    s.add_argument("--query", required=True)
    s.add_argument("--constraints", required=True)
    s.add_argument("--scheme", choices=["c1", "c2", "auto"], default="auto")
    s.add_argument("--verify-docs", type=_non_negative, default=0, metavar="K")

    s = sub.add_parser("translate", parents=[common], help="translate queries, CQs or constraints")
    s.add_argument("--query", help="SPARQL query, or a conjunctive query when it contains '<-'")
    s.add_argument("--constraints")
    s.add_argument("--to", choices=["algebra", "c1", "c2", "sparql"], default="algebra")
    s.add_argument("--scheme", choices=["c1", "c2"], default="c1", help="inverse scheme for --to sparql")

    s = sub.add_parser("analyze", parents=[common], help="chase termination analysis")
    s.add_argument("--constraints", required=True)
    s.add_argument("--check", choices=list(CONDITIONS))

    s = sub.add_parser("gen", parents=[common], help="generate reduction instances")
    s.add_argument("kind", choices=["qbf", "3sat"])
    s.add_argument("--fragment", choices=sorted(red.ENCODERS), default="ao")
    s.add_argument("--formula", help="formula file; a random formula is drawn from --seed when omitted")
    s.add_argument("--out", help="directory for instance.doc, instance.q and instance.mapping")
    s.add_argument("--count", type=_positive, help="check this many random instances against brute force")
    return p


# ---------------------------------------------------------------- output

def _scalar(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def structured(data, prefix: str = "") -> list[str]:
    """Flatten nested dicts and lists into 'dotted.key: value' lines; list items count from 1."""
    if isinstance(data, dict):
        items = list(data.items())
    elif isinstance(data, (list, tuple)):
        items = [(i, v) for i, v in enumerate(data, 1)]
    else:
        return [f"{prefix}: {_scalar(data)}".rstrip()]
    if not items:
        return [f"{prefix}: {'{}' if isinstance(data, dict) else '[]'}"] if prefix else []
    out = []
    for k, v in items:
        out.extend(structured(v, f"{prefix}.{k}" if prefix else str(k)))
    return out


def _emit(args, pretty: str, data) -> str:
    if args.format == "structured":
        return "\n".join(structured(data)) + "\n"
    return pretty if pretty.endswith("\n") or not pretty else pretty + "\n"


# ---------------------------------------------------------------- inputs

def _read(path: str) -> str:
    return Path(path).read_text()


def _query(path: str):
    return sx.parse_query(_read(path))


def _mapping(arg: str):
    text = arg if arg.lstrip().startswith("{") else _read(arg)
    return parse_mapping(text)


# ---------------------------------------------------------------- commands

def _cmd_eval(args):
    omega = evaluate(_query(args.query), parse_document(_read(args.data)))
    ordered = sorted(omega, key=str)
    data = {"count": len(ordered), "mappings": [str(m) for m in ordered]}
    return OK, _emit(args, format_mappings(ordered), data)


def _cmd_member(args):
    m = _mapping(args.mapping)
    ok = membership(m, parse_document(_read(args.data)), _query(args.query))
    return (OK if ok else NEGATIVE), _emit(args, "true" if ok else "false", {"mapping": str(m), "member": ok})


def _parse_site(text: str) -> tuple:
    text = text.strip()
    if text in ("", "root", "-"):
        return ()
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise ValueError(f"bad site {text!r}; expected comma-separated child indices") from None


def _cmd_rewrite(args):
    source = translate(_query(args.query))
    if (args.rule is None) == (args.strategy is None):
        raise _UsageError("rewrite: give exactly one of --rule or --strategy\n")
    trace = RewriteTrace()
    if args.strategy:
        result, trace = {"normalize-filters": normalize_filters, "extract-negation": extract_negation}[args.strategy](
            source)
    else:
        rule = RuleId(args.rule)
        dirs = [args.direction] if args.direction else [LR, RL]
        if args.site is not None:
            path = _parse_site(args.site)
            try:
                node = subtree(source, path)
            except (IndexError, AttributeError):
                raise ValueError(f"no subexpression at site {list(path)}") from None
            hits = [(d, path, node, rewrite_at(rule, d, node)) for d in dirs]
            hits = [h for h in hits if h[3] is not None]
        else:
            sites = [s for s in applicable_sites(rule, source) if s.direction in dirs]
            hits = []
            if sites:
                node = subtree(source, sites[0].path)
                hits = [(sites[0].direction, sites[0].path, node, rewrite_at(rule, sites[0].direction, node))]
        if not hits:
            where = f" at {list(_parse_site(args.site))}" if args.site is not None else ""
            msg = f"{rule} does not apply{where}"
            return NEGATIVE, _emit(args, msg, {"applied": False, "rule": rule.value})
        d, path, node, new = hits[0]
        trace.append(Step(rule, d, path, node, new))
        result = replace(source, path, new)
    lines = [trace.format().rstrip("\n")] if trace else ["no steps"]
    lines.append(f"result: {result}")
    data = {
        "source": str(source),
        "steps": [{"rule": s.rule.value, "direction": s.direction, "path": ",".join(map(str, s.path)) or "root",
                   "before": str(s.before), "after": str(s.after)} for s in trace],
        "result": str(result),
    }
    if args.data:
        doc = parse_document(_read(args.data))
        same = evaluate(source, doc) == evaluate(result, doc)
        lines.append(f"same result on {args.data}: {'yes' if same else 'no'}")
        data["same_result"] = same
    return OK, _emit(args, "\n".join(lines), data)


def _cmd_optimize(args):
    q = _query(args.query)
    sigma = parse_constraints(_read(args.constraints))
    report = optimize(q, sigma, budget=args.budget, scheme=args.scheme, verify_docs=args.verify_docs,
                      seed=args.seed)
    pretty = report.format()
    data = report.as_dict()
    if args.trace:
        body = q.body if isinstance(q, sx.Query) else q
        if sx.is_and_only(body):
            facts, _ = freeze(c1_translate(q))
            out = chase(facts, sigma, budget=args.budget, trace=True)
            steps = [str(t) for t in out.trace]
            pretty += "\nchase of the query body:\n" + ("".join(f"  {s}\n" for s in steps) or "  no steps\n")
            data["chase"] = steps
    return OK, _emit(args, pretty, data)


def _cmd_translate(args):
    if (args.query is None) == (args.constraints is None):
        raise _UsageError("translate: give exactly one of --query or --constraints\n")
    if args.constraints is not None:
        if args.to != "c2":
            raise _UsageError("translate: constraints translate only with --to c2\n")
        prime = sigma_prime(parse_constraints(_read(args.constraints)))
        text = format_constraints(prime)
        return OK, _emit(args, text, {"constraints": text.splitlines()})
    text = _read(args.query)
    if "<-" in text:
        if args.to != "sparql":
            raise _UsageError("translate: a conjunctive query translates only with --to sparql\n")
        cq = parse_cq(text)
        out = (c1_inverse if args.scheme == "c1" else c2_inverse)(cq)
    else:
        if args.to == "sparql":
            raise _UsageError("translate: --to sparql expects a conjunctive query\n")
        q = sx.parse_query(text)
        out = {"algebra": translate, "c1": c1_translate, "c2": c2_translate}[args.to](q)
    if isinstance(out, Undefined):
        return NEGATIVE, _emit(args, f"undefined: {out.reason}", {"defined": False, "reason": out.reason})
    return OK, _emit(args, str(out), {"defined": True, "result": str(out)})


def _cmd_analyze(args):
    sigma = parse_constraints(_read(args.constraints))
    report = analyze(sigma, checks=[args.check] if args.check else None)
    pretty = "\n".join([report.summary()] + report.details())
    return OK, _emit(args, pretty, report.as_dict())


def _instance(kind: str, fragment: str, formula):
    if kind == "qbf":
        return red.ENCODERS[fragment](formula), red.brute_force_qbf(formula)
    return red.encode_3sat(formula), red.brute_force_sat(formula)


def _check(job) -> tuple[bool, bool]:
    kind, fragment, formula = job
    enc, truth = _instance(kind, fragment, formula)
    return red.decide(enc), truth


def _random_formula(kind: str, rng: random.Random):
    return red.random_cnf_qbf(rng) if kind == "qbf" else red.random_3cnf(rng)


def _cmd_gen(args):
    rng = random.Random(args.seed)
    if args.count:
        if args.formula or args.out:
            raise _UsageError("gen: --count draws random formulas and writes no files\n")
        jobs = [(args.kind, args.fragment, _random_formula(args.kind, rng)) for _ in range(args.count)]
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as pool:
                results = list(pool.map(_check, jobs, chunksize=max(1, len(jobs) // (4 * args.jobs))))
        else:
            results = [_check(j) for j in jobs]
        rows = [{"formula": str(j[2]), "truth": t, "member": m, "agree": m == t} for j, (m, t) in zip(jobs, results)]
        bad = sum(not r["agree"] for r in rows)
        lines = [f"{i}: {'ok' if r['agree'] else 'MISMATCH'} truth={_scalar(r['truth'])} "
                 f"member={_scalar(r['member'])} {r['formula']}" for i, r in enumerate(rows, 1)]
        lines.append(f"{len(rows) - bad}/{len(rows)} agree")
        return (NEGATIVE if bad else OK), _emit(args, "\n".join(lines), {"instances": rows, "mismatches": bad})
    if args.formula:
        text = _read(args.formula)
        formula = red.parse_qbf(text) if args.kind == "qbf" else red.parse_cnf3(text)
    else:
        formula = _random_formula(args.kind, rng)
    (doc, query, target), truth = _instance(args.kind, args.fragment, formula)
    files = {"doc": serialize_document(doc), "q": f"{query}\n", "mapping": f"{target}\n"}
    data = {"formula": str(formula), "truth": truth, "target": str(target)}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for ext, body in files.items():
            (out / f"instance.{ext}").write_text(body)
        data["files"] = [str(out / f"instance.{ext}") for ext in files]
        pretty = "\n".join([f"formula: {formula}", f"truth: {_scalar(truth)}"] + [f"wrote {f}" for f in data["files"]])
    else:
        data.update({"document": files["doc"].splitlines(), "query": str(query)})
        pretty = (f"# formula: {formula}\n# truth: {_scalar(truth)}\n# document\n{files['doc']}"
                  f"# query\n{files['q']}# target\n{files['mapping']}")
    return OK, _emit(args, pretty, data)


COMMANDS = {"eval": _cmd_eval, "member": _cmd_member, "rewrite": _cmd_rewrite, "optimize": _cmd_optimize,
            "translate": _cmd_translate, "analyze": _cmd_analyze, "gen": _cmd_gen}


def run(argv: Sequence[str]) -> CliResult:
    """Parse and dispatch; never raises and never exits."""
    parser = build_parser()
    out, err = io.StringIO(), io.StringIO()
    try:
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            args = parser.parse_args(list(argv))
    except SystemExit as e:
        return CliResult(e.code if isinstance(e.code, int) else ERROR, out.getvalue(), err.getvalue())
    except _UsageError as e:
        return CliResult(ERROR, "", str(e))
    try:
        status, text = COMMANDS[args.command](args)
    except _UsageError as e:
        return CliResult(ERROR, "", str(e))
    except (OSError, ValueError, RecursionError) as e:
        return CliResult(ERROR, "", f"sparqlopt {args.command}: error: {e}\n")
    return CliResult(status, text)


def main(argv: Sequence[str] | None = None) -> int:
    result = run(sys.argv[1:] if argv is None else argv)
    sys.stdout.write(result.output)
    sys.stderr.write(result.errors)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
