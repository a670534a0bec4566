"""Command-line interface.

One binary with subcommands covering the full workflow: ingest a
manifest, compile a dictionary, augment, train, align, evaluate, sweep
a grid, and report it. Exit codes: 0 success, 1 validation error,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .augment import build_augmented_dataset, parse_spec_file, standard_preset
from .corpus import build_corpus, write_corpus
from .errors import AlignlabError, ValidationError
from .evaluate import aggregate, emit_heatmap, match_boundaries
from .features import FeatureConfig
from .hmm import TrainSchedule, align_corpus, prepare_training_data, train_pipeline
from .hmm.model import load_model, save_model
from .hmm.train import TrainerConfig
from .lexicon import (
    NaturalClassMap,
    compile_lexicon,
    default_identity_classes,
    load_grapheme_map,
    load_natural_class_map,
    load_phone_class_map,
    read_lexicon,
    write_lexicon,
)
from .sweep import (
    EXPERIMENT2_BASE,
    GridAssets,
    RunConfig,
    TrainSchedule as _TS,  # noqa: F401  (re-exported for config parsing)
    enumerate_experiment1,
    enumerate_experiment2,
    load_store,
    report_grid,
    run_grid,
)
from .synth import SynthSpec, generate_corpus
from .textgrid import save_textgrid


def _parse_g2p_args(pairs: list[str]) -> dict:
    maps = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValidationError(f"--g2p expects language=path, got {pair!r}")
        language, path = pair.split("=", 1)
        maps[language] = load_grapheme_map(path, language)
    return maps


def _load_corpus(manifest: str, name: str | None = None):
    result = build_corpus(manifest, name=name)
    for issue in result.issues:
        print(f"  [row {issue.row}] {issue.utterance_id}: {issue.message}", file=sys.stderr)
    return result.corpus


def _class_map_for(arg: str, inventory: set[str]):
    if arg == "identity":
        return default_identity_classes(inventory)
    return load_phone_class_map(arg, inventory)


def _natural_map(arg: str | None, inventory) -> NaturalClassMap:
    if arg is None:
        return NaturalClassMap({})
    return load_natural_class_map(arg)


def cmd_ingest(args) -> int:
    corpus = _load_corpus(args.manifest, name=args.name)
    manifest = write_corpus(corpus, args.out)
    print(f"ingested {len(corpus)} utterances ({corpus.total_minutes:.1f} min) -> {manifest}")
    return 0


def cmd_dict(args) -> int:
    maps = _parse_g2p_args(args.g2p)
    corpora = [_load_corpus(m) for m in args.manifest]
    lexicon = compile_lexicon(corpora, maps)
    write_lexicon(lexicon, args.out)
    print(f"wrote {len(lexicon)} words, {len(lexicon.phone_inventory)} phones -> {args.out}")
    return 0


def cmd_augment(args) -> int:
    corpus = _load_corpus(args.manifest)
    specs = standard_preset() if args.preset else parse_spec_file(args.specs)
    augmented = build_augmented_dataset(corpus, specs)
    manifest = write_corpus(augmented, args.out)
    print(f"{len(corpus)} -> {len(augmented)} utterances -> {manifest}")
    return 0


def cmd_train(args) -> int:
    corpus = _load_corpus(args.manifest)
    lexicon = read_lexicon(args.lexicon)
    schedule = TrainSchedule.parse(args.schedule)
    data = prepare_training_data(corpus, lexicon)
    for uid, reason in data.skipped:
        print(f"  skipped {uid}: {reason}", file=sys.stderr)
    class_map = _class_map_for(args.classes, set(data.inventory))
    result = train_pipeline(data, schedule, class_map, seed=args.seed, out_dir=args.out)
    model_path = Path(args.out) / "final.am"
    save_model(result.model, model_path)
    print(f"trained {schedule.label} on {data.corpus_name}: {model_path}")
    return 0


def cmd_align(args) -> int:
    corpus = _load_corpus(args.manifest)
    lexicon = read_lexicon(args.lexicon)
    model = load_model(args.model)
    aligned, skipped = align_corpus(model, corpus, lexicon)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for utt in aligned:
        save_textgrid(utt.tiers(), utt.audio.duration_seconds, out / f"{utt.id}.TextGrid")
    for uid, reason in skipped:
        print(f"  skipped {uid}: {reason}", file=sys.stderr)
    print(f"aligned {len(aligned)} utterances -> {out}")
    return 0


def cmd_eval(args) -> int:
    from .textgrid import PHONE_TIER, load_textgrid

    ref = _load_corpus(args.ref)
    hyp_dir = Path(args.hyp)
    natural = _natural_map(args.natural_classes, None)
    pairs = []
    for utt in ref:
        if utt.phone_tier is None:
            continue
        grid = hyp_dir / f"{utt.id}.TextGrid"
        if not grid.exists():
            print(f"  missing hypothesis for {utt.id}", file=sys.stderr)
            continue
        tiers, _ = load_textgrid(grid)
        hyp_tier = next((t for t in tiers if t.kind == PHONE_TIER), None)
        if hyp_tier is None:
            print(f"  no phone tier in {grid}", file=sys.stderr)
            continue
        pairs.extend(match_boundaries(utt.phone_tier, hyp_tier, utterance_id=utt.id))
    report = aggregate(pairs, natural, model_label=args.label, dataset_label=ref.name)
    paths = emit_heatmap([report], args.out)
    print(
        f"{report.count} boundaries: overall abs {report.overall_abs_ms:.2f} ms, "
        f"signed {report.overall_signed_ms:.2f} ms"
    )
    for p in paths:
        print(f"  wrote {p}")
    return 0


def _read_kv_config(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path} line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _grid_assets(args) -> GridAssets:
    datasets = {}
    for pair in args.dataset:
        if "=" not in pair:
            raise ValidationError(f"--dataset expects label=manifest, got {pair!r}")
        label, manifest = pair.split("=", 1)
        datasets[label] = _load_corpus(manifest, name=label)
    maps = _parse_g2p_args(args.g2p)
    lexicon = compile_lexicon(list(datasets.values()), maps)
    class_maps = {}
    for pair in args.classes or []:
        if "=" not in pair:
            raise ValidationError(f"--classes expects name=path|identity, got {pair!r}")
        name, path = pair.split("=", 1)
        class_maps[name] = (
            None if path == "identity" else load_phone_class_map(path, set(lexicon.phone_inventory))
        )
    natural = _natural_map(args.natural_classes, None)
    return GridAssets(datasets, lexicon, class_maps, natural)


def cmd_sweep(args) -> int:
    assets = _grid_assets(args)
    class_names = list(assets.class_maps) or ["identity"]
    if "identity" not in class_names and args.grid != "custom":
        class_names.append("identity")
    for name, cmap in list(assets.class_maps.items()):
        if cmap is None:
            assets.class_maps[name] = default_identity_classes(
                set(assets.lexicon.phone_inventory)
            )

    if args.grid == "exp1":
        base = TrainSchedule.parse(args.schedule or "7_8_8_8")
        configs = enumerate_experiment1(
            list(assets.datasets), class_names, base, seed=args.seed
        )
    elif args.grid == "exp2":
        base = TrainSchedule.parse(args.schedule or EXPERIMENT2_BASE)
        configs = enumerate_experiment2(list(assets.datasets), base, seed=args.seed)
    else:
        values = _read_kv_config(args.config)
        schedules = [TrainSchedule.parse(s) for s in values["schedules"].split(",")]
        class_list = values.get("class_maps", "identity").split(",")
        configs = [
            RunConfig(dataset, cname.strip(), schedule, args.seed)
            for dataset in assets.datasets
            for cname in class_list
            for schedule in schedules
        ]
    for name in {c.class_map for c in configs}:
        if name != "identity" and name not in assets.class_maps:
            raise ValidationError(f"grid references unknown class map {name!r}")

    results = run_grid(configs, assets, args.store, workers=args.workers)
    done = sum(1 for r in results if r.status == "done")
    failed = [r for r in results if r.status == "failed"]
    print(f"grid finished: {done} done, {len(failed)} failed, store={args.store}")
    for r in failed:
        print(f"  failed {r.config.label}: {r.error}", file=sys.stderr)
    return 0


def cmd_report(args) -> int:
    results = sorted(load_store(args.store).values(), key=lambda r: r.run_id)
    paths = report_grid(results, args.out)
    print(f"wrote {len(paths)} report files to {args.out}")
    best = Path(args.out) / "best_run.txt"
    print(best.read_text(encoding="utf-8"), end="")
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec(
        minutes=args.minutes,
        n_phones=args.phones,
        n_speakers=args.speakers,
        seed=args.seed,
    )
    result = generate_corpus(spec)
    out = Path(args.out)
    manifest = write_corpus(result.corpus, out)
    write_lexicon(result.lexicon, out / "lexicon.txt")
    with (out / "g2p.txt").open("w", encoding="utf-8") as fh:
        for grapheme, phones in result.grapheme_map.rules:
            fh.write(f"{grapheme}\t{' '.join(phones)}\n")
    with (out / "natural_classes.txt").open("w", encoding="utf-8") as fh:
        by_class: dict[str, list[str]] = {}
        for phone, label in result.natural_classes.mapping.items():
            by_class.setdefault(label, []).append(phone)
        for label in result.natural_classes.class_order:
            if label in by_class:
                fh.write(f"{label}: {' '.join(sorted(by_class[label]))}\n")
    print(
        f"synthesized {len(result.corpus)} utterances "
        f"({result.corpus.total_minutes:.1f} min) -> {manifest}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alignlab",
        description="Forced-alignment laboratory: train, align, evaluate, sweep.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a manifest and write a normalized corpus")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--name")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("dict", help="compile a pronunciation lexicon")
    p.add_argument("--manifest", action="append", required=True)
    p.add_argument("--g2p", action="append", required=True, metavar="LANG=PATH")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dict)

    p = sub.add_parser("augment", help="apply an augmentation preset or spec file")
    p.add_argument("--manifest", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--preset", action="store_const", const="standard")
    group.add_argument("--specs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="train a four-stage acoustic model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--schedule", default="35_40_40_40", metavar="M_T_L_S")
    p.add_argument("--classes", default="identity", metavar="FILE|identity")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("align", help="align a corpus with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("eval", help="score hypothesis TextGrids against a reference corpus")
    p.add_argument("--ref", required=True, metavar="MANIFEST")
    p.add_argument("--hyp", required=True, metavar="DIR")
    p.add_argument("--natural-classes")
    p.add_argument("--label", default="model")
    p.add_argument("--out", required=True, metavar="BASENAME")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="run an experiment grid")
    p.add_argument("grid", choices=["exp1", "exp2", "custom"])
    p.add_argument("--dataset", action="append", required=True, metavar="LABEL=MANIFEST")
    p.add_argument("--g2p", action="append", required=True, metavar="LANG=PATH")
    p.add_argument("--classes", action="append", metavar="NAME=PATH|identity")
    p.add_argument("--natural-classes")
    p.add_argument("--schedule")
    p.add_argument("--config", help="flat key=value config (custom grids)")
    p.add_argument("--store", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="tables and heatmaps from a results store")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="generate a synthetic benchmark corpus")
    p.add_argument("--minutes", type=float, default=10.0)
    p.add_argument("--phones", type=int, default=8)
    p.add_argument("--speakers", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AlignlabError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
