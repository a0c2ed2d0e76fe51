"""Command-line entry point wiring the pipeline stages:
sample, preprocess, synth, train, classify, report.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import arch, harness, nn, preprocess, sampler, synthgen
from .catalog import ObjectClass, filter_good, parse_catalog


def _parse_overrides(pairs: list[str]) -> dict[str, str]:
    overrides = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise SystemExit(f"error: --set expects KEY=VALUE, got {pair!r}")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def _load_config(args) -> arch.RunConfig:
    cfg = arch.RunConfig()
    if args.config:
        try:
            cfg = arch.parse_config(Path(args.config).read_text())
        except FileNotFoundError:
            raise SystemExit(f"error: config file {args.config} not found")
    try:
        cfg = arch.apply_overrides(cfg, _parse_overrides(args.set))
    except (arch.ConfigError, ValueError) as exc:
        raise SystemExit(f"error: {exc}")
    if args.seed is not None:
        cfg = arch.apply_overrides(cfg, {"seed": str(args.seed)})
    if args.out is not None:
        cfg = arch.apply_overrides(cfg, {"out": args.out})
    return cfg


def cmd_synth(args) -> int:
    overrides = _parse_overrides(args.set)
    counts = {
        "train": int(overrides.get("train", 100)),
        "valid": int(overrides.get("valid", 30)),
        "test": int(overrides.get("test", 50)),
    }
    z_range = (float(overrides.get("zmin", 0.0)), float(overrides.get("zmax", 1.5)))
    noise = float(overrides.get("noise", 0.05))
    seed = args.seed if args.seed is not None else 0
    out = Path(args.out or "synth")
    data = synthgen.synth_dataset(counts, z_range, noise, seed)
    for split, spectra in data.spectra.items():
        split_dir = out / "spectra" / split
        split_dir.mkdir(parents=True, exist_ok=True)
        for spec in spectra:
            preprocess.write_spectrum(spec, split_dir / f"{spec.name}.txt")
    from .catalog import serialize_catalog

    (out / "catalog.txt").write_text(serialize_catalog(data.records))
    sets_dir = out / "spectra_sets"
    sets_dir.mkdir(parents=True, exist_ok=True)
    for split_idx, split in enumerate(sampler.SPLIT_NAMES):
        recs = [r for r in data.records if r.mjd == 55000 + split_idx]
        (sets_dir / split).write_text(sampler.format_split_list(recs))
    print(f"synth: wrote {sum(len(v) for v in data.spectra.values())} spectra under {out}")
    return 0


def cmd_sample(args) -> int:
    if not args.catalog:
        raise SystemExit("error: sample requires --catalog FILE")
    try:
        records = parse_catalog(Path(args.catalog).read_text())
    except FileNotFoundError:
        raise SystemExit(f"error: catalog file {args.catalog} not found")
    good = filter_good(records)
    if not good:
        raise SystemExit("error: no good records (specboss=1, zwarning=0) in catalog")
    overrides = _parse_overrides(args.set)
    targets = {
        "train": int(overrides.get("train", 100)),
        "valid": int(overrides.get("valid", 10)),
        "test": int(overrides.get("test", 50)),
    }
    n_intervals = int(overrides.get("intervals", 60))
    seed = args.seed if args.seed is not None else 0
    out = Path(args.out or "sample")
    per_class = {c: [r for r in good if r.obj_class == c] for c in ObjectClass}
    split = sampler.build_splits(
        per_class,
        {name: {c: targets[name] for c in ObjectClass} for name in sampler.SPLIT_NAMES},
        n_intervals=n_intervals,
        seed=seed,
    )
    sets_dir = out / "spectra_sets"
    sets_dir.mkdir(parents=True, exist_ok=True)
    for name in sampler.SPLIT_NAMES:
        (sets_dir / name).write_text(sampler.format_split_list(split.split(name)))
    # histogram / CDF diagnostics per class, raw pool vs training selection
    for cls in ObjectClass:
        pool = per_class[cls]
        chosen = [r for r in split.train if r.obj_class == cls]
        if not pool:
            continue
        (out / f"hist_{cls.label}_raw.txt").write_text(
            sampler.format_histogram(sampler.histogram(pool, 0.1))
        )
        (out / f"cdf_{cls.label}_raw.txt").write_text(
            sampler.format_cdf(sampler.empirical_cdf([r.z for r in pool]))
        )
        if chosen:
            (out / f"hist_{cls.label}_selected.txt").write_text(
                sampler.format_histogram(sampler.histogram(chosen, 0.1))
            )
            (out / f"cdf_{cls.label}_selected.txt").write_text(
                sampler.format_cdf(sampler.empirical_cdf([r.z for r in chosen]))
            )
    for note in split.shortfalls:
        print(f"sample: shortfall {note}")
    print(f"sample: wrote split lists under {sets_dir}")
    return 0


def cmd_preprocess(args) -> int:
    if not args.spectra or not args.lists:
        raise SystemExit("error: preprocess requires --spectra DIR and --lists DIR")
    side = args.side
    out = Path(args.out or "preprocessed")
    imgs_dir = out / "imgs"
    sets_dir = out / "spectra_sets"
    sets_dir.mkdir(parents=True, exist_ok=True)
    total = kept = 0
    for split in sampler.SPLIT_NAMES:
        list_path = Path(args.lists) / split
        if not list_path.exists():
            raise SystemExit(f"error: split list {list_path} not found")
        rows = sampler.parse_split_list(list_path.read_text())
        surviving = []
        for plate, mjd, fiberid, cls, z in rows:
            total += 1
            spec_path = Path(args.spectra) / split / f"{plate}-{mjd}-{fiberid}.txt"
            if not spec_path.exists():
                raise SystemExit(f"error: spectrum file {spec_path} not found")
            spec = preprocess.read_spectrum(spec_path, (plate, mjd, fiberid), cls, z)
            try:
                reduced = preprocess.reduce_spectrum(spec)
            except preprocess.ImpairedSpectrum:
                continue
            verdict = preprocess.filter_impaired(reduced)
            if not verdict.passed:
                continue
            img = preprocess.spectrum_to_image(reduced, side)
            img_dir = imgs_dir / split / cls.label
            img_dir.mkdir(parents=True, exist_ok=True)
            preprocess.write_pgm(img, img_dir / f"{reduced.name}.pgm")
            surviving.append((plate, mjd, fiberid, cls, z))
            kept += 1
        from .catalog import CatalogRecord

        recs = [CatalogRecord(p, m, f, 1, 0, c, z) for p, m, f, c, z in surviving]
        (sets_dir / split).write_text(sampler.format_split_list(recs))
    print(f"preprocess: {kept}/{total} spectra rasterized to {side}x{side} under {imgs_dir}")
    return 0


def _load_split(cfg: arch.RunConfig, split: str) -> list[harness.LabeledSample]:
    list_path = Path(cfg.lists) / split
    if not list_path.exists():
        raise SystemExit(f"error: split list {list_path} not found")
    rows = sampler.parse_split_list(list_path.read_text())
    return harness.load_dataset(cfg.imgs, split, rows)


def cmd_train(args) -> int:
    cfg = _load_config(args)
    net = arch.build_network(cfg)
    net.initialize(cfg.seed)
    train_set = _load_split(cfg, "train")
    valid_set = _load_split(cfg, "valid")
    tcfg = nn.TrainConfig(cfg.eta0, cfg.decay, cfg.epochs, cfg.seed)
    out = Path(cfg.out)
    report = harness.train(net, train_set, valid_set, tcfg, out_dir=out / "net")
    (out / "train_report.json").write_text(report.to_json())
    harness.emit_curves(report, out)
    (out / "run.conf").write_text(arch.serialize_config(cfg))
    best = report.rows[report.best_epoch]
    print(
        f"train: {cfg.arch} {cfg.input_side}x{cfg.input_side} {cfg.pooling}, "
        f"{cfg.epochs} epochs; best epoch {report.best_epoch} "
        f"val rate {best.val_rate:.4f}"
    )
    return 0


def cmd_classify(args) -> int:
    cfg = _load_config(args)
    net = arch.build_network(cfg)
    checkpoint = args.checkpoint
    if checkpoint is None:
        report_path = Path(cfg.out) / "train_report.json"
        if not report_path.exists():
            raise SystemExit("error: classify needs --checkpoint or a prior train run in the out dir")
        report = harness.TrainReport.from_json(report_path.read_text())
        checkpoint = report.checkpoints[report.best_epoch]
    try:
        nn.load_checkpoint(net, checkpoint)
    except FileNotFoundError:
        raise SystemExit(f"error: checkpoint {checkpoint} not found")
    test_set = _load_split(cfg, "test")
    match_text, mismatch_text = harness.classify(net, test_set)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "classify_match").write_text(match_text)
    (out / "classify_mismatch").write_text(mismatch_text)
    cm = harness.evaluate(net, test_set)
    rates = cm.class_rates
    print(
        f"classify: {cm.total} objects, success rate {cm.overall_rate:.4f} "
        f"(galaxy {rates[0]:.4f}, qso {rates[1]:.4f}, star {rates[2]:.4f})"
    )
    return 0


def cmd_report(args) -> int:
    if not args.report:
        raise SystemExit("error: report requires --report FILE")
    try:
        report = harness.TrainReport.from_json(Path(args.report).read_text())
    except FileNotFoundError:
        raise SystemExit(f"error: report file {args.report} not found")
    print(f"epochs: {len(report.rows) - 1}")
    print(f"best epoch: {report.best_epoch}")
    for row in report.rows:
        rates = ", ".join(f"{r:.4f}" for r in row.class_rates)
        print(
            f"epoch {row.epoch:3d}  eta {row.eta:.6f}  loss {row.train_loss:10.4f}  "
            f"val {row.val_rate:.4f}  per-class [{rates}]"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specnet",
        description="Spectral classification pipeline: dataset sampling, "
        "spectrum rasterization and ConvNet training.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--seed", type=int, help="override the seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")

    p = sub.add_parser("synth", help="generate a synthetic labeled spectrum corpus")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sample", help="build stratified split lists from a catalog")
    common(p)
    p.add_argument("--catalog", help="catalog text file")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("preprocess", help="reduce, filter and rasterize spectra to PGM images")
    common(p)
    p.add_argument("--spectra", help="directory with <split>/<id>.txt spectra")
    p.add_argument("--lists", help="directory with train/valid/test split lists")
    p.add_argument("--side", type=int, default=60, help="image side length (default 60)")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train a network and emit report, curves, checkpoints")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="classify the test split with a trained network")
    common(p)
    p.add_argument("--checkpoint", help="checkpoint file (default: best epoch of the out dir)")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("report", help="print a human-readable training report summary")
    common(p)
    p.add_argument("--report", help="train_report.json produced by the train subcommand")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
