"""Command-line front end.

    python -m lookahead_decoding decode --config cfg.json --out results.jsonl
    python -m lookahead_decoding eval --results results.jsonl --constraints cons.json
    python -m lookahead_decoding train-ngram --corpus corpus.txt --order 2 --k 0.1 --out lm.json
    python -m lookahead_decoding oracle --config cfg.json

Exit codes: 0 success, 2 bad config or input, 3 oracle enumeration budget.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import constraints as C
from .heuristics import HeuristicWeights
from .lookahead import LookaheadConfig
from .metrics import concepts_from_constraints, coverage, term_use_rate
from .models import DecodingError, load_model, read_corpus, ngram_from_sentences, save_ngram
from .oracle import BudgetExceededError, OracleBudget, exact_argmax
from .search import DecodeParams, EmptyBeamError, decode, topk_sample_decode

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET = 0, 2, 3
DECODE_MODES = ("plain", "unconstrained_astar", "neurologic", "neurologic_astar", "topk_sample")


class ConfigError(Exception):
    pass


def _resolve(base: Path, p: str) -> Path:
    path = Path(p)
    return path if path.is_absolute() else base / path


def _section(doc: dict, name: str, required: bool = False) -> dict:
    value = doc.get(name)
    if value is None:
        if required:
            raise ConfigError(f"missing section {name!r}")
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"section {name!r} must be an object")
    return value


def _build(cls, fields: dict, where: str, **extra):
    known = {f.name for f in dataclasses.fields(cls)}
    for key in fields:
        if key not in known:
            raise ConfigError(f"unknown field {where}.{key}")
    try:
        return cls(**fields, **extra)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_params(raw: dict, workers: int | None = None) -> tuple[DecodeParams, str]:
    raw = dict(raw)
    mode = raw.pop("mode", "plain")
    if mode not in DECODE_MODES:
        raise ConfigError(f"field params.mode: unknown mode {mode!r}; expected one of {DECODE_MODES}")
    weights = _build(HeuristicWeights, raw.pop("weights", {}) or {}, "params.weights")
    la_raw = dict(raw.pop("lookahead", {}) or {})
    if "seed" in raw and "seed" not in la_raw:
        la_raw["seed"] = raw["seed"]
    lookahead = _build(LookaheadConfig, la_raw, "params.lookahead")
    sampling = mode == "topk_sample" or lookahead.strategy == "sampling"
    if sampling and "seed" not in raw:
        raise ConfigError("field params.seed is required for sampling modes")
    if raw.get("lookahead_fanout") in ("inf", None):
        raw["lookahead_fanout"] = math.inf
    raw.pop("include_reversibly_satisfied", None)
    if workers is not None:
        raw["workers"] = workers
    params = _build(DecodeParams, raw, "params", weights=weights, lookahead=lookahead,
                    mode="plain" if mode == "topk_sample" else mode)
    return params, mode


def _echo(params: DecodeParams, mode: str) -> dict:
    out = dataclasses.asdict(params)
    out["mode"] = mode
    out.pop("workers")
    if math.isinf(out["lookahead_fanout"]):
        out["lookahead_fanout"] = "inf"
    return out


class Job:
    """Everything loaded from a config file."""

    def __init__(self, path, workers: int | None = None):
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        base = path.parent

        model_sec = _section(doc, "model", required=True)
        if "path" not in model_sec:
            raise ConfigError("field model.path is required")
        self.model = load_model(_resolve(base, model_sec["path"]), model_sec.get("type"))
        vocab = self.model.vocab

        params_raw = _section(doc, "params")
        include_rev = params_raw.get("include_reversibly_satisfied", True)
        cons_sec = _section(doc, "constraints")
        if "path" in cons_sec:
            self.constraints = C.load_constraints(_resolve(base, cons_sec["path"]), vocab,
                                                  include_reversibly_satisfied=include_rev)
        elif "clauses" in cons_sec:
            self.constraints = C.ConstraintSet.from_json(cons_sec["clauses"], vocab,
                                                         include_reversibly_satisfied=include_rev)
        else:
            self.constraints = C.ConstraintSet(include_reversibly_satisfied=include_rev)

        cfg_workers = doc.get("workers", 1)
        self.params, self.mode = parse_params(params_raw, workers if workers is not None else cfg_workers)
        self.num_return = doc.get("num_return", self.params.beam_size)
        if not isinstance(self.num_return, int) or self.num_return < 1:
            raise ConfigError("field num_return must be a positive integer")
        self.oracle_cap = doc.get("oracle_cap", 10**7)

        inputs = doc.get("inputs", [""])
        if isinstance(inputs, dict) and "path" in inputs:
            text = _resolve(base, inputs["path"]).read_text(encoding="utf-8")
            inputs = text.splitlines()
        if not isinstance(inputs, list) or not all(isinstance(x, str) for x in inputs):
            raise ConfigError("field inputs must be a list of strings or {\"path\": ...}")
        self.inputs = inputs

    def encode_input(self, line: str) -> tuple[int, ...]:
        return self.model.vocab.encode(line.split())


def _run_one(job: Job, line: str) -> dict:
    vocab = job.model.vocab
    record = {"input": line}
    try:
        prompt = job.encode_input(line)
        if job.mode == "topk_sample":
            result = topk_sample_decode(job.model, job.params, prompt, job.constraints)
        else:
            result = decode(job.model, job.constraints, job.params, prompt)
        record["outputs"] = [
            {
                "tokens": vocab.decode(o.generated),
                "logprob": o.logprob,
                "objective": o.objective,
                "clause_statuses": [s.name.lower() for s in o.statuses],
            }
            for o in result.outputs[:job.num_return]
        ]
    except (EmptyBeamError, DecodingError) as exc:
        record["error"] = str(exc)
    record["params_echo"] = _echo(job.params, job.mode)
    record["seed"] = job.params.seed
    return record


def cmd_decode(config_path, out_path, workers: int | None = None) -> int:
    job = Job(config_path, workers)
    n = job.params.workers
    if n > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            records = list(pool.map(lambda line: _run_one(job, line), job.inputs))
    else:
        records = [_run_one(job, line) for line in job.inputs]
    with open(out_path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return EXIT_OK


def _raw_concepts(doc) -> list:
    """Concepts straight from a constraint file, without a vocabulary."""
    if not isinstance(doc, list):
        raise ConfigError("constraint file must hold a list of clauses")
    concepts = []
    for clause in doc:
        alts = [lit["phrase"] for lit in clause if lit.get("polarity") == "+"]
        if alts:
            concepts.append(alts)
    return concepts


def cmd_eval(results_path, constraints_path) -> dict:
    concepts = _raw_concepts(json.loads(Path(constraints_path).read_text(encoding="utf-8")))
    outputs, errors = [], 0
    with open(results_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            if "error" in rec or not rec.get("outputs"):
                errors += 1
                continue
            outputs.append(rec["outputs"][0]["tokens"])
    covs = [coverage(o, concepts) for o in outputs]
    return {
        "records": len(outputs) + errors,
        "errors": errors,
        "coverage": sum(covs) / len(covs) if covs else 0.0,
        "term_use_rate": term_use_rate(outputs, [concepts] * len(outputs)),
    }


def cmd_train_ngram(corpus, order: int, k: float, out) -> int:
    model = ngram_from_sentences(read_corpus(corpus), order, k)
    save_ngram(model, out)
    return EXIT_OK


def cmd_oracle(config_path) -> list[dict]:
    job = Job(config_path)
    vocab = job.model.vocab
    budget = OracleBudget(job.params.max_len, job.oracle_cap)
    rows = []
    for line in job.inputs:
        seq, f = exact_argmax(job.model, job.constraints, job.params.weights.clause_penalty, budget,
                              job.encode_input(line))
        start = 1 + len(line.split())
        rows.append({"input": line, "tokens": vocab.decode(seq[start:]), "objective": f})
    return rows


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lookahead-decoding", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decode", help="run decoding jobs from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("eval", help="constraint metrics over a results file")
    p.add_argument("--results", required=True)
    p.add_argument("--constraints", required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("train-ngram", help="fit an add-k n-gram model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("oracle", help="exhaustive search for small configs")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    return parser


def _emit(payload: str, out) -> None:
    if out:
        Path(out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "decode":
            return cmd_decode(args.config, args.out, args.workers)
        if args.command == "eval":
            _emit(json.dumps(cmd_eval(args.results, args.constraints), indent=1) + "\n", args.out)
            return EXIT_OK
        if args.command == "train-ngram":
            return cmd_train_ngram(args.corpus, args.order, args.k, args.out)
        if args.command == "oracle":
            rows = cmd_oracle(args.config)
            _emit("".join(json.dumps(r) + "\n" for r in rows), args.out)
            return EXIT_OK
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, DecodingError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
