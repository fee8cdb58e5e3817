"""``selector-lab`` command line.

Every subcommand writes its artifacts plus ``manifest.json`` into ``--out``.
Exit status: 0 on success, 1 when a learner or check fails, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    Dataset,
    EmptySelection,
    ErrorDistribution,
    ErrorSampler,
    PlantedModel,
    Rng,
    angle,
    basis,
    classifier_from_dict,
    make_planted,
    rotate_towards,
)
from .experiments import SWEEP_FIELDS, SweepConfig, fit_exponent, random_finite_distribution, sweep
from .listlearn import SparseListConfig, sparse_list, write_jsonl
from .oracle import GridSpec, band_oracle_learner, exhaustive_best_subset, grid_best_halfspace, planted_joint_error
from .psgd import PsgdConfig, best_iterate, iterate_errors, psgd
from .reduction import FiniteDistribution, InfeasibleBand, reduce_additive, reduce_multiplicative, threshold_family
from .selector import BudgetExceeded, CcfcConfig, ccfc, ccslc
from .verify import failed, run_suite

DEFAULT_BUDGET = 10**9


class UsageError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    params: dict = field(default_factory=dict)
    schedule: str = "override"
    seeds: list[int] = field(default_factory=list)
    output_dir: str = "."

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        return cls(obj["kind"], dict(obj["params"]), obj["schedule"], list(obj["seeds"]), obj["output_dir"])


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def parse_seeds(text: str) -> list[int]:
    """``"1..10"``, ``"1,4,9"`` or a mix such as ``"1..3,7"``."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            if int(hi) < int(lo):
                raise UsageError(f"empty seed range {part!r}")
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise UsageError("no seeds given")
    return seeds


def parse_floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _versions() -> dict:
    return {"selector_lab": __version__, "numpy": np.__version__, "python": platform.python_version()}


def _write_manifest(out: Path, cfg: ExperimentConfig, seed: int, started: float) -> None:
    _dump({"config": cfg.to_dict(), "seed": seed, "versions": _versions(),
           "wall_time": round(time.perf_counter() - started, 6)}, out / "manifest.json")


def _load_model(args) -> PlantedModel | None:
    return PlantedModel.load(args.model) if getattr(args, "model", None) else None


def _data_source(args):
    """A CSV dataset (resampled with replacement) or a planted model sampler."""
    if getattr(args, "data", None):
        return Dataset.from_csv(args.data)
    model = _load_model(args)
    if model is None:
        raise UsageError("give --data or --model")
    return model


def _classifiers(args) -> list:
    if getattr(args, "classifiers", None):
        objs = json.loads(Path(args.classifiers).read_text())
        return [classifier_from_dict(o) for o in objs]
    model = _load_model(args)
    if model is None:
        raise UsageError("give --classifiers or --model")
    return [model.c_star]


def _ccfc_config(args) -> CcfcConfig:
    if args.schedule == "theoretical":
        if any(v is not None for v in (args.T, args.N, args.holdout)):
            raise UsageError("--T/--N/--holdout only apply to --schedule override")
        return CcfcConfig(args.epsilon, args.delta, max_examples=args.max_examples, force=args.force)
    if None in (args.T, args.N, args.holdout):
        raise UsageError("--schedule override needs --T, --N and --holdout")
    return CcfcConfig(args.epsilon, args.delta, args.T, args.N, args.holdout)


def _load_instance(args) -> FiniteDistribution:
    if args.instance:
        obj = json.loads(Path(args.instance).read_text())
        return FiniteDistribution(np.array(obj["points"], dtype=float), obj["y"], obj["mass"])
    return random_finite_distribution(Rng(args.seed).child("instance"), args.atoms)


def _instance_dict(dist: FiniteDistribution) -> dict:
    return {"points": dist.points.tolist(), "y": dist.y.tolist(), "mass": dist.mass.tolist()}


def _pair_summary(result, model, seed) -> dict:
    out = result.to_dict(seed)
    if model is not None:
        out["true_joint_error"] = planted_joint_error(model, result.selector.w)
        out["angle_to_v"] = angle(model.v, result.selector.w)
    return out


# ---------------------------------------------------------------------------
# subcommands; each writes into ``out`` and returns an exit code
# ---------------------------------------------------------------------------


def cmd_gen(args, out: Path) -> int:
    v = None
    if args.v_angle is not None:
        v = rotate_towards(basis(args.d), args.v_angle, Rng(args.seed).child("v"))
    model = make_planted(args.d, args.p_in, args.p_out, args.seed, v=v)
    model.save(out / "model.json")
    model.draw(Rng(args.seed).child("gen"), args.n).to_csv(out / "data.csv")
    return 0


def cmd_psgd(args, out: Path) -> int:
    model = _load_model(args)
    c = _classifiers(args)[0]
    if args.data:
        data = Dataset.from_csv(args.data)
        source = ErrorDistribution(data, c)
        d = data.d
    else:
        if model is None:
            raise UsageError("give --data or --model")
        source = ErrorSampler(model, c)
        d = model.d
    trace = psgd(source, PsgdConfig(args.T, args.N, basis(d)), Rng(args.seed))
    trace.to_csv(out / "trace.csv")
    summary = {"w_final": trace.iterates[-1].tolist(), "examples_used": trace.examples_used,
               "replacement_from": trace.replacement_from, "beta": trace.meta["beta"]}
    if model is not None:
        holdout = model.draw(Rng(args.seed).child("holdout"), args.holdout)
        w = best_iterate(trace, holdout, c)
        summary.update(w_best=w.tolist(), holdout_joint_error=float(iterate_errors(w, holdout, c)[0]),
                       true_joint_error=planted_joint_error(model, w), angle_to_v=angle(model.v, w))
    _dump(summary, out / "result.json")
    if args.plot:
        from .plotting import plot_trace

        plot_trace(trace, out / "trace.png")
    return 0


def cmd_ccfc(args, out: Path) -> int:
    result = ccfc(_data_source(args), _classifiers(args), _ccfc_config(args), Rng(args.seed))
    _dump(_pair_summary(result, _load_model(args), args.seed), out / "result.json")
    return 0


def cmd_ccslc(args, out: Path) -> int:
    result = ccslc(_data_source(args), args.sparsity, args.m, _ccfc_config(args), Rng(args.seed), nu=args.nu)
    _dump(_pair_summary(result, _load_model(args), args.seed), out / "result.json")
    return 0


def cmd_list_learn(args, out: Path) -> int:
    data = Dataset.from_csv(args.data)
    cfg = SparseListConfig(s=args.s, m=args.m, nu=args.nu, dedup=args.dedup, margin_side=args.margin_side)
    classifiers = sparse_list(data, cfg)
    write_jsonl(classifiers, out / "list.jsonl")
    _dump({"list_size": len(classifiers)}, out / "result.json")
    return 0


def cmd_reduce(args, out: Path) -> int:
    dist = _load_instance(args)
    _dump(_instance_dict(dist), out / "instance.json")
    family = threshold_family(dist.points[:, 0])
    learner = band_oracle_learner(family)
    if args.mode == "additive":
        res = reduce_additive(learner, family, dist, args.epsilon, args.delta)
        bound_of = lambda m: m + 6 * args.epsilon  # noqa: E731
    else:
        res = reduce_multiplicative(learner, family, dist, args.alpha, args.epsilon, args.delta)
        bound_of = lambda m: (1 + args.alpha) * (m + 4 * args.epsilon)  # noqa: E731
    res.write_audit(out / "audit.jsonl")
    best = exhaustive_best_subset(dist, family)[1]
    ok = res.err <= bound_of(best) + 1e-12
    _dump({"mode": args.mode, "subset": str(res.subset), "err": res.err, "family_min": best,
           "bound": bound_of(best), "within_bound": ok, "winner": res.winner}, out / "result.json")
    return 0 if ok else 1


def cmd_oracle(args, out: Path) -> int:
    if args.kind == "grid":
        if not args.data:
            raise UsageError("oracle grid needs --data")
        data = Dataset.from_csv(args.data)
        c = _classifiers(args)[0]
        report = grid_best_halfspace(data, c, GridSpec(data.d, args.resolution, tuple(parse_floats(args.thresholds))))
        report.to_csv(out / "grid.csv")
        _dump({"w": report.halfspace.w.tolist(), "t": report.halfspace.t, "joint_error": report.joint_error,
               "index": report.index}, out / "result.json")
        return 0
    dist = _load_instance(args)
    _dump(_instance_dict(dist), out / "instance.json")
    family = threshold_family(dist.points[:, 0])
    band = None if args.band is None else tuple(parse_floats(args.band))
    subset, loss, index = exhaustive_best_subset(dist, family, band)
    _dump({"subset": str(subset), "loss": loss, "index": index, "band": band}, out / "result.json")
    return 0


def cmd_verify(args, out: Path) -> int:
    reports = run_suite(args.suite, args.seed)
    text = json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"
    (out / "reports.json").write_text(text)
    sys.stdout.write(text)
    return 1 if failed(reports) else 0


def cmd_sweep(args, out: Path) -> int:
    cfg = SweepConfig(tuple(parse_floats(args.eps)), tuple(parse_seeds(args.seeds)), d=args.d, p_out=args.p_out,
                      holdout_n=args.holdout, max_examples=args.max_examples)
    rows = sweep(cfg)
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_FIELDS)
        for r in rows:
            writer.writerow([repr(r[k]) if isinstance(r[k], float) else r[k] for k in SWEEP_FIELDS])
    fit = fit_exponent(rows)
    _dump({"C": None if fit is None else fit[0], "p": None if fit is None else fit[1]}, out / "fit.json")
    if args.plot:
        from .plotting import plot_sweep

        plot_sweep(rows, out / "sweep.png", fit)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="selector_lab_out", help="artifact directory (created if missing)")


def _add_sources(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="CSV with header x_1..x_d,y")
    p.add_argument("--model", help="planted model JSON written by `gen`")
    p.add_argument("--classifiers", help="JSON list of classifier objects")


def _add_schedule(p: argparse.ArgumentParser) -> None:
    p.add_argument("--schedule", choices=("override", "theoretical"), default="override")
    p.add_argument("--T", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--holdout", type=int)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--max-examples", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--force", action="store_true", help="run a theoretical schedule above the example budget")


def _add_instance(p: argparse.ArgumentParser) -> None:
    p.add_argument("--instance", help="finite distribution JSON {points, y, mass}; random if omitted")
    p.add_argument("--atoms", type=int, default=31, help="max atoms of a random instance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="selector-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="sample a planted dataset")
    _add_common(p)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--p-in", type=float, required=True)
    p.add_argument("--p-out", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--v-angle", type=float, help="place v at this angle from e1 instead of at random")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("psgd", help="one projected-SGD run")
    _add_common(p)
    _add_sources(p)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--holdout", type=int, default=50_000)
    p.add_argument("--plot", action="store_true", help="also write trace.png")
    p.set_defaults(func=cmd_psgd)

    p = sub.add_parser("ccfc", help="best classifier/selector pair over a finite class")
    _add_common(p)
    _add_sources(p)
    _add_schedule(p)
    p.set_defaults(func=cmd_ccfc)

    p = sub.add_parser("ccslc", help="sparse list learning followed by ccfc")
    _add_common(p)
    _add_sources(p)
    _add_schedule(p)
    p.add_argument("--sparsity", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--nu", type=float, default=1e-3)
    p.set_defaults(func=cmd_ccslc)

    p = sub.add_parser("list-learn", help="candidate list of sparse linear classifiers")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--nu", type=float, default=1e-3)
    p.add_argument("--dedup", action="store_true")
    p.add_argument("--margin-side", choices=("paper", "consistent"), default="paper")
    p.set_defaults(func=cmd_list_learn)

    p = sub.add_parser("reduce", help="classification through the band-restricted exhaustive learner")
    p.add_argument("mode", choices=("additive", "multiplicative"))
    _add_common(p)
    _add_instance(p)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--alpha", type=float, default=0.5)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("oracle", help="brute-force ground truth")
    p.add_argument("kind", choices=("grid", "exhaustive"))
    _add_common(p)
    _add_sources(p)
    _add_instance(p)
    p.add_argument("--resolution", type=int, default=3600)
    p.add_argument("--thresholds", default="0")
    p.add_argument("--band", help="a,b mass band for the conditional loss")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("verify", help="Monte-Carlo checks of the supporting bounds")
    _add_common(p)
    p.add_argument("--suite", choices=("default", "quick"), default="default")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="planted error against eps")
    _add_common(p)
    p.add_argument("--eps", required=True, help="comma-separated values in (0, 1/e]")
    p.add_argument("--seeds", default="1..10")
    p.add_argument("--d", type=int, default=5)
    p.add_argument("--p-out", type=float, default=0.5)
    p.add_argument("--holdout", type=int, default=50_000)
    p.add_argument("--max-examples", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--plot", action="store_true", help="also write sweep.png")
    p.set_defaults(func=cmd_sweep)
    return parser


def _schedule_of(args) -> str:
    return getattr(args, "schedule", "override")


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = time.perf_counter()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "seed")}
    try:
        seeds = parse_seeds(args.seeds) if getattr(args, "seeds", None) else [args.seed]
        cfg = ExperimentConfig(args.command, params, _schedule_of(args), seeds, str(out))
        code = args.func(args, out)
    except (BudgetExceeded, UsageError) as exc:
        print(f"selector-lab {args.command}: {exc}", file=sys.stderr)
        return 2
    except (EmptySelection, InfeasibleBand, RuntimeError) as exc:
        print(f"selector-lab {args.command}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError) as exc:
        print(f"selector-lab {args.command}: {exc}", file=sys.stderr)
        return 2
    _write_manifest(out, cfg, args.seed, started)
    return code


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
