"""Command-line entry point: ``fieldplan {validate,generate,evaluate,render,pareto}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from fieldplan import __version__
from fieldplan.artifact_io import (
    LayoutError,
    archive_to_dict,
    build_document,
    canonical_json,
    merge_archives,
    read_layout,
    reevaluate,
    render_svg,
    write_layout,
    write_pareto_csv,
)
from fieldplan.evolution import OptimizerConfig, evolve
from fieldplan.field_engine import FieldConstants
from fieldplan.spec_model import OBJECTIVES, SpecError, build_grid, entrance_candidate_cells, load_spec, validate_spec

log = logging.getLogger("fieldplan")

EXIT_OK, EXIT_FAIL, EXIT_ARGS, EXIT_SPEC, EXIT_IO = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def _positive(kind):
    def parse(text: str):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__}: {text!r}") from None
        if value <= 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return value

    return parse


def _objectives(text: str) -> list[str]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    bad = [n for n in names if n not in OBJECTIVES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown objectives {bad}; choose from {', '.join(OBJECTIVES)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fieldplan", description=__doc__)
    parser.add_argument("--version", action="version", version=f"fieldplan {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a design spec")
    p.add_argument("spec", type=Path)

    p = sub.add_parser("generate", help="run the optimizer and write layouts")
    p.add_argument("spec", type=Path)
    p.add_argument("-o", "--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pop", type=int, default=50)
    p.add_argument("--gens", type=int, default=100)
    p.add_argument("--cell-size", type=_positive(float))
    p.add_argument("--objectives", type=_objectives)
    p.add_argument("--shorten", type=_positive(float), default=0.8)
    p.add_argument("--delta", type=_positive(float), default=FieldConstants.delta)
    p.add_argument("--epsilon", type=_positive(float), default=FieldConstants.epsilon)
    p.add_argument("--pc", type=float, default=0.9, help="crossover probability")
    p.add_argument("--pm", type=float, default=0.1, help="per-gene mutation probability")

    p = sub.add_parser("evaluate", help="recompute a layout file's objectives")
    p.add_argument("layout", type=Path)

    p = sub.add_parser("render", help="draw a layout file as SVG")
    p.add_argument("layout", type=Path)
    p.add_argument("-o", "--out", type=Path)

    p = sub.add_parser("pareto", help="merge run archives into one Pareto table")
    p.add_argument("archives", type=Path, nargs="+")
    p.add_argument("-o", "--out", type=Path)
    return parser


def _read_spec(path: Path):
    data = path.read_bytes()
    return load_spec(data)


def cmd_validate(args) -> int:
    spec = _read_spec(args.spec)
    grid = build_grid(spec)
    candidates = entrance_candidate_cells(spec, grid)
    print(f"ok: {len(spec.rooms)} rooms, {grid.inside_count} cells of {spec.cell_size} m, "
          f"{len(candidates)} entry candidate(s), objectives {', '.join(spec.objectives)}")
    return EXIT_OK


def cmd_generate(args) -> int:
    spec = _read_spec(args.spec)
    overrides = {}
    if args.cell_size is not None:
        overrides["cell_size"] = args.cell_size
    if args.objectives is not None:
        overrides["objectives"] = tuple(args.objectives)
    if overrides:
        spec = replace(spec, **overrides)
        validate_spec(spec)
    try:
        config = OptimizerConfig(
            population_size=args.pop,
            generations=args.gens,
            crossover_probability=args.pc,
            mutation_probability=args.pm,
            seed=args.seed,
            shorten_factor=args.shorten,
            constants=FieldConstants(args.delta, args.epsilon),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    grid = build_grid(spec)
    archive = evolve(spec, config, grid)
    log.info("%d evaluations in %.1f s", archive.evaluations, archive.wall_clock)

    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "fieldplan",
        "version": __version__,
        "spec_path": str(args.spec),
        "spec_fingerprint": spec.fingerprint(),
        "spec": spec.to_dict(),
        "config": {
            "seed": config.seed,
            "population_size": config.population_size,
            "generations": config.generations,
            "crossover_probability": config.crossover_probability,
            "mutation_probability": config.mutation_probability,
            "eta_c": config.eta_c,
            "eta_m": config.eta_m,
            "shorten_factor": config.shorten_factor,
            "delta": config.constants.delta,
            "epsilon": config.constants.epsilon,
        },
        "outputs": {"archive": "archive.json", "pareto": "pareto.csv", "layouts": []},
    }
    (out / "archive.json").write_text(canonical_json(archive_to_dict(archive, spec, config)), encoding="utf-8")
    (out / "pareto.csv").write_text(write_pareto_csv(archive), encoding="utf-8", newline="\n")
    for k, member in enumerate(archive.pareto):
        doc = build_document(spec, member.genome, grid, config.constants, config.shorten_factor)
        name = f"layout_{k:03d}"
        (out / f"{name}.json").write_bytes(write_layout(doc))
        (out / f"{name}.svg").write_text(render_svg(doc, grid), encoding="utf-8", newline="\n")
        manifest["outputs"]["layouts"].append(name)
    (out / "manifest.json").write_text(canonical_json(manifest), encoding="utf-8")
    print(f"wrote {len(archive.pareto)} Pareto layouts to {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    doc = read_layout(args.layout.read_bytes())
    fresh = reevaluate(doc)
    for label in doc.objective_labels:
        print(f"{label}\t{fresh[label]!r}")
    if fresh != doc.objectives:
        print("warning: recomputed objectives differ from the embedded vector", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_render(args) -> int:
    doc = read_layout(args.layout.read_bytes())
    svg = render_svg(doc)
    target = args.out or args.layout.with_suffix(".svg")
    target.write_text(svg, encoding="utf-8", newline="\n")
    print(f"wrote {target}")
    return EXIT_OK


def cmd_pareto(args) -> int:
    archives = [json.loads(p.read_text(encoding="utf-8")) for p in args.archives]
    try:
        merged = merge_archives(archives)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    table = write_pareto_csv(merged)
    if args.out:
        args.out.write_text(table, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(table)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "render": cmd_render,
    "pareto": cmd_pareto,
}


def dispatch(args: argparse.Namespace) -> int:
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except SpecError as exc:
        print(f"invalid spec: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except LayoutError as exc:
        print(f"invalid layout: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except (OSError, json.JSONDecodeError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
