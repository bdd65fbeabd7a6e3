import json
import math
import os
import sys

import click
import numpy as np
from click.core import ParameterSource
from rich import box
from rich.console import Console
from rich.table import Table

from bavit.config import (
    BAVIT_LAYERS,
    BAVIT_TOKENS,
    CONFIG_PATH,
    DEFAULT_BATCH_SIZE,
    DEFAULT_CCA_STEPS,
    DEFAULT_CCA_THRESHOLD,
    DEFAULT_CLIP_NORM,
    DEFAULT_DEPTH,
    DEFAULT_EMBED_DIM,
    DEFAULT_EPOCHS,
    DEFAULT_GAMMA,
    DEFAULT_HEADS,
    DEFAULT_IMAGE_SIZE,
    DEFAULT_LR,
    DEFAULT_MIN_FRACTION,
    DEFAULT_MLP_RATIO,
    DEFAULT_OVERLAP_MODE,
    DEFAULT_PATCH_SIZE,
    DEFAULT_STEP_SIZE,
    DEFAULT_TAU,
    DETECTOR_LAYERS,
    DETECTOR_TOKENS,
    REPORT_SPARSITIES,
    env_var_name,
    load_config_file,
)
from bavit.data import (
    MAX_SYNTH_SHAPES,
    SynthSpec,
    convert_coco,
    generate_synthetic,
    load_detection_dataset,
    load_labeled_dir,
    load_mask_dataset,
    make_batches,
    normalize,
    read_json,
)
from bavit.errors import BavitError, DataError, NumericError
from bavit.labeling import PatchGrid, write_label_map
from bavit.net import ModelConfig, count_params, estimate_flops, init_params
from bavit.postproc import CcaConfig, cca
from bavit.prune import (
    PruneMask,
    detector_mask,
    mask_from_probs,
    reduction_table,
    theta_for_sparsity,
    token_reduction,
)
from bavit.train import (
    LrSchedule,
    OptimState,
    TrainReport,
    classification_report,
    load_checkpoint,
    predict_probs,
    save_checkpoint,
    train,
)
from bavit.utils.image import convert_image, read_ppm, resize_image, to_float, to_uint8, write_image
from bavit.utils.logging import configure_logging, get_logger
from bavit.viz import RenderSpec, render_overlay, render_sparse, sparse_filename

console = Console()

logger = get_logger(__name__)

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3


class EnvOverrideCommand(click.Command):
    """BAVIT_<COMMAND>_<PARAM> environment variables win over flags and config."""

    def parse_args(self, ctx, args):
        rest = super().parse_args(ctx, args)
        for param in self.params:
            raw = os.environ.get(env_var_name(self.name, param.name))
            if raw is not None:
                logger.info(f"{param.name} overridden from environment")
                ctx.params[param.name] = param.process_value(ctx, raw)
        return rest


class BavitGroup(click.Group):
    command_class = EnvOverrideCommand

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(
                args=args,
                prog_name=prog_name,
                complete_var=complete_var,
                standalone_mode=False,
                **extra,
            )
        except click.UsageError as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except click.ClickException as e:
            e.show()
            sys.exit(e.exit_code)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        except NumericError as e:
            click.echo(f"Numeric failure: {e}", err=True)
            sys.exit(EXIT_NUMERIC)
        except (BavitError, OSError) as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(EXIT_DATA)
        sys.exit(rv if isinstance(rv, int) else 0)


def write_json(path, data):
    with open(path, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def parse_sparsities(ctx, param, value):
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    try:
        values = [float(v) for v in str(value).strip("[]()").split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter("expected comma-separated fractions, e.g. 0.46,0.35,0")
    if not values or any(not 0.0 <= v <= 1.0 for v in values):
        raise click.BadParameter("sparsities must be fractions in [0, 1]")
    return values


def resolve_defaults(group, default_map):
    """Key each [subcommand] table by parameter name, accepting flag spellings like `format`."""
    resolved = {}
    for command_name, values in default_map.items():
        command = group.commands.get(command_name)
        if command is None:
            logger.warning(f"Config section [{command_name}] matches no subcommand")
            continue
        names = {}
        for param in command.params:
            names[param.name] = param.name
            for opt in param.opts:
                names[opt.lstrip("-").replace("-", "_")] = param.name
        resolved[command_name] = {names.get(key, key): value for key, value in values.items()}
    return resolved


def cca_config_from(enabled, steps, threshold):
    return CcaConfig(threshold=threshold, steps=steps) if enabled else None


def cca_options(func):
    func = click.option(
        "--cca-threshold",
        type=click.IntRange(min=0),
        default=DEFAULT_CCA_THRESHOLD,
        show_default=True,
        help="FG-neighbor count a BG patch must exceed to flip",
    )(func)
    func = click.option(
        "--cca-steps",
        type=click.IntRange(min=0),
        default=DEFAULT_CCA_STEPS,
        show_default=True,
        help="Number of post-processing steps",
    )(func)
    return click.option(
        "--cca", "use_cca", is_flag=True, help="Apply neighborhood post-processing"
    )(func)


@click.group(cls=BavitGroup)
@click.option(
    "--debug",
    "-D",
    "logging_level",
    type=click.IntRange(0, 2),
    default=0,
    help="Set logging level: 0=WARNING (default), 1=INFO, 2=DEBUG",
)
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=CONFIG_PATH,
    show_default=True,
    help="TOML file with one [subcommand] table of flag defaults",
)
@click.pass_context
def cli(ctx, logging_level, config_path):
    """Background-aware token classification: labels, training, pruning."""
    configure_logging(logging_level)

    if logging_level > 0:
        click.echo(f"Logging level: {['WARNING', 'INFO', 'DEBUG'][logging_level]}")

    ctx.default_map = resolve_defaults(ctx.command, load_config_file(config_path))
    ctx.ensure_object(dict)
    ctx.obj["DEBUG"] = logging_level


@cli.command("annotate")
@click.option("--boxes", type=click.Path(dir_okay=False), help="Box annotation JSON")
@click.option("--masks", type=click.Path(file_okay=False), help="Directory of PGM masks")
@click.option("--images", required=True, type=click.Path(file_okay=False), help="Directory of PPM images")
@click.option("--size", default=DEFAULT_IMAGE_SIZE, show_default=True, type=click.IntRange(min=1), help="Square image size after resize")
@click.option("--patch", default=DEFAULT_PATCH_SIZE, show_default=True, type=click.IntRange(min=1), help="Patch size k")
@click.option("--tau", default=DEFAULT_TAU, show_default=True, type=click.FloatRange(0, 1), help="Box overlap threshold")
@click.option("--mode", type=click.Choice(["coverage", "jaccard"]), default=DEFAULT_OVERLAP_MODE, show_default=True, help="Box overlap measure")
@click.option("--min-fraction", default=DEFAULT_MIN_FRACTION, show_default=True, type=click.FloatRange(0, 1, min_open=True, max_open=True), help="Mask pixel fraction a FG patch must exceed")
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Output directory for label files")
def annotate(boxes, masks, images, size, patch, tau, mode, min_fraction, out):
    """Write per-patch FG/BG label files from boxes or masks."""
    if (boxes is None) == (masks is None):
        raise click.UsageError("Pass exactly one of --boxes or --masks")

    errors = []
    if boxes:
        samples = load_detection_dataset(boxes, images, size, patch, tau, mode, errors)
    else:
        samples = load_mask_dataset(masks, images, size, patch, min_fraction, errors)

    os.makedirs(out, exist_ok=True)
    records = []
    for sample in samples:
        name = f"{sample.source_id}.txt"
        write_label_map(os.path.join(out, name), sample.label_map)
        records.append(
            {
                "id": sample.source_id,
                "labels": name,
                "fg_fraction": round(sample.label_map.fg_fraction, 6),
            }
        )

    manifest = {
        "source": "boxes" if boxes else "masks",
        "image_size": size,
        "patch_size": patch,
        "tau": tau if boxes else None,
        "mode": mode if boxes else None,
        "min_fraction": None if boxes else min_fraction,
        "samples": records,
        "errors": [{"id": e.source_id, "error": e.message} for e in errors],
    }
    write_json(os.path.join(out, "manifest.json"), manifest)
    console.print(f"Labeled {len(records)} images ({len(errors)} errors) -> {out}")


@cli.command("import-coco")
@click.argument("coco_file", type=click.Path(dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output annotation JSON")
def import_coco(coco_file, out):
    """Convert a COCO detection file to the minimal box schema."""
    converted = convert_coco(read_json(coco_file))
    write_json(out, converted)
    console.print(
        f"Imported {len(converted['images'])} images, {len(converted['boxes'])} boxes -> {out}"
    )


@cli.command("convert")
@click.argument("src", type=click.Path(dir_okay=False))
@click.argument("dst", type=click.Path(dir_okay=False))
@click.option("--mask", is_flag=True, help="Write an 8-bit PGM mask instead of an RGB PPM")
def convert(src, dst, mask):
    """Convert any image Pillow reads into the native PPM/PGM formats."""
    width, height = convert_image(src, dst, mask=mask)
    console.print(f"Wrote {dst} ({width}x{height})")


@cli.command("synth")
@click.option("--n", "count", default=100, show_default=True, type=click.IntRange(min=1), help="Number of images")
@click.option("--size", default=128, show_default=True, type=click.IntRange(min=1), help="Square image size")
@click.option("--patch", default=DEFAULT_PATCH_SIZE, show_default=True, type=click.IntRange(min=1), help="Patch size k")
@click.option("--seed", default=1, show_default=True, type=int, help="Generator seed")
@click.option("--min-shapes", default=1, show_default=True, type=click.IntRange(0, MAX_SYNTH_SHAPES), help="Fewest shapes per image")
@click.option("--max-shapes", default=4, show_default=True, type=click.IntRange(0, MAX_SYNTH_SHAPES), help="Most shapes per image")
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Output corpus directory")
def synth(count, size, patch, seed, min_shapes, max_shapes, out):
    """Generate a seeded synthetic shapes corpus (images, masks, labels)."""
    spec = SynthSpec(
        image_size=size,
        patch_size=patch,
        min_shapes=min_shapes,
        max_shapes=max_shapes,
        rng_seed=seed,
    )
    for sub in ("images", "masks", "labels"):
        os.makedirs(os.path.join(out, sub), exist_ok=True)

    records = []
    for sample in generate_synthetic(spec, count):
        sid = sample.source_id
        write_image(os.path.join(out, "images", f"{sid}.ppm"), to_uint8(sample.image))
        write_image(os.path.join(out, "masks", f"{sid}.pgm"), sample.mask.values)
        write_label_map(os.path.join(out, "labels", f"{sid}.txt"), sample.label_map)
        records.append({"id": sid, "fg_fraction": round(sample.label_map.fg_fraction, 6)})

    write_json(
        os.path.join(out, "manifest.json"),
        {
            "image_size": size,
            "patch_size": patch,
            "seed": seed,
            "shapes_per_image": [min_shapes, max_shapes],
            "samples": records,
        },
    )
    mean_fg = float(np.mean([r["fg_fraction"] for r in records]))
    console.print(f"Wrote {count} samples to {out} (mean FG fraction {mean_fg:.3f})")


def _load_corpus(data_dir, patch):
    samples = list(load_labeled_dir(data_dir, patch))
    if not samples:
        raise DataError(f"{data_dir}: no labeled samples found")
    return samples


def _report_table(report: TrainReport, last: int = 10) -> Table:
    table = Table(box=box.ROUNDED, title="training")
    for column in ("epoch", "loss", "accuracy", "val", "lr", "time"):
        table.add_column(column, justify="right")
    for stats in report.epochs[-last:]:
        table.add_row(
            str(stats.epoch),
            f"{stats.loss:.4f}",
            f"{stats.accuracy:.4f}",
            "-" if stats.val_accuracy is None else f"{stats.val_accuracy:.4f}",
            f"{stats.lr:.1e}",
            f"{stats.seconds:.1f}s",
        )
    return table


@cli.command("train")
@click.option("--data", required=True, type=click.Path(file_okay=False), help="Corpus with images/ and labels/")
@click.option("--val-data", type=click.Path(file_okay=False), help="Validation corpus")
@click.option("--patch", default=DEFAULT_PATCH_SIZE, show_default=True, type=click.IntRange(min=1), help="Patch size k")
@click.option("--depth", default=DEFAULT_DEPTH, show_default=True, type=click.IntRange(min=0), help="Encoder layers")
@click.option("--dim", default=DEFAULT_EMBED_DIM, show_default=True, type=click.IntRange(min=1), help="Embedding size S")
@click.option("--heads", default=DEFAULT_HEADS, show_default=True, type=click.IntRange(min=1), help="Attention heads")
@click.option("--mlp-ratio", default=DEFAULT_MLP_RATIO, show_default=True, type=click.IntRange(min=1), help="MLP hidden multiplier")
@click.option("--epochs", default=DEFAULT_EPOCHS, show_default=True, type=click.IntRange(min=0), help="Training epochs")
@click.option("--lr", default=DEFAULT_LR, show_default=True, type=click.FloatRange(min=0, min_open=True), help="Base learning rate")
@click.option("--step-size", default=DEFAULT_STEP_SIZE, show_default=True, type=click.IntRange(min=1), help="Epochs between lr decays")
@click.option("--gamma", default=DEFAULT_GAMMA, show_default=True, type=click.FloatRange(0, 1, min_open=True), help="lr decay factor")
@click.option("--batch", default=DEFAULT_BATCH_SIZE, show_default=True, type=click.IntRange(min=1), help="Batch size")
@click.option("--seed", default=0, show_default=True, type=int, help="Seed for init and shuffling")
@click.option("--clip", default=DEFAULT_CLIP_NORM, show_default=True, type=click.FloatRange(min=0), help="Global gradient-norm clip (0 disables)")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Checkpoint path")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), help="Report JSON path [default: <out>.json]")
def train_cmd(data, val_data, patch, depth, dim, heads, mlp_ratio, epochs, lr, step_size, gamma, batch, seed, clip, out, report_path):
    """Train the token classifier and write a checkpoint plus report."""
    samples = _load_corpus(data, patch)
    grid = samples[0].label_map.grid
    config = ModelConfig(
        image_width=grid.image_width,
        image_height=grid.image_height,
        patch_size=patch,
        embed_dim=dim,
        depth=depth,
        heads=heads,
        mlp_ratio=mlp_ratio,
    )
    logger.info(
        f"Model: {count_params(config):,} params, {estimate_flops(config) / 1e9:.3f} GFLOPs/image"
    )
    batches = list(make_batches(samples, batch, shuffle_seed=seed))
    val_batches = None
    if val_data:
        val_batches = list(make_batches(_load_corpus(val_data, patch), batch, shuffle_seed=None))

    schedule = LrSchedule(base_lr=lr, step_size=step_size, gamma=gamma)
    if epochs == 0:
        params = init_params(config, seed)
        state = OptimState.zeros_like(params, lr)
        report = TrainReport()
    else:
        params, report, state = train(
            config,
            batches,
            epochs,
            schedule,
            seed=seed,
            clip_norm=clip,
            val_data=val_batches,
            checkpoint_path=out,
        )

    save_checkpoint(out, params, config, state)
    report_path = report_path or f"{out}.json"
    write_json(
        report_path,
        {
            "config": config.to_dict(),
            "params": count_params(config),
            "samples": len(samples),
            "seed": seed,
            "schedule": {"base_lr": lr, "step_size": step_size, "gamma": gamma},
            "epochs": report.to_rows(),
        },
    )
    if report.epochs:
        console.print(_report_table(report))
    console.print(f"Saved checkpoint {out} and report {report_path}")


@cli.command("eval")
@click.option("--ckpt", required=True, type=click.Path(dir_okay=False), help="Checkpoint path")
@click.option("--data", required=True, type=click.Path(file_okay=False), help="Corpus with images/ and labels/")
@click.option("--batch", default=DEFAULT_BATCH_SIZE, show_default=True, type=click.IntRange(min=1), help="Batch size")
@cca_options
@click.option("--json", "json_path", type=click.Path(dir_okay=False), help="Write the metrics as JSON")
def eval_cmd(ckpt, data, batch, use_cca, cca_steps, cca_threshold, json_path):
    """Token accuracy and per-class precision/recall of a checkpoint."""
    checkpoint = load_checkpoint(ckpt)
    config = checkpoint.config
    batches = make_batches(_load_corpus(data, config.patch_size), batch, shuffle_seed=None)
    metrics = classification_report(
        checkpoint.params, config, batches, cca_config_from(use_cca, cca_steps, cca_threshold)
    )

    table = Table(box=box.ROUNDED, title=f"accuracy {metrics['accuracy']:.4f}")
    for column in ("class", "precision", "recall", "support"):
        table.add_column(column, justify="right")
    for name, values in metrics["classes"].items():
        table.add_row(name, f"{values['precision']:.4f}", f"{values['recall']:.4f}", str(values["support"]))
    console.print(table)
    console.print(f"accuracy: {metrics['accuracy']:.6f}")

    if json_path:
        write_json(json_path, metrics)


def _measure_reduction(ckpt, data, theta, target_sparsity, cca_config, detector_tokens, detector_layers, bavit_layers, batch):
    checkpoint = load_checkpoint(ckpt)
    config = checkpoint.config
    side = math.isqrt(detector_tokens)
    if side * side != detector_tokens:
        raise DataError(f"--detector-tokens {detector_tokens} is not a square grid")
    detector_grid = PatchGrid.from_shape(side, side, config.patch_size)

    probs = []
    for b in make_batches(_load_corpus(data, config.patch_size), batch, shuffle_seed=None):
        probs.extend(predict_probs(checkpoint.params, config, b.images))
    if target_sparsity is not None:
        theta = theta_for_sparsity(probs, target_sparsity)

    ty = detector_tokens * detector_layers
    tb = config.tokens * bavit_layers
    sparsities = [
        detector_mask(p, config.grid, detector_grid, theta, cca_config).sparsity for p in probs
    ]
    return {
        "theta": theta,
        "images": len(sparsities),
        "mean_sparsity": float(np.mean(sparsities)),
        "bavit_tokens": config.tokens,
        "reduction_pct": token_reduction([(ty, tb, s) for s in sparsities]),
    }


@cli.command("prune-report")
@click.option("--sparsities", default=",".join(str(s) for s in REPORT_SPARSITIES), show_default=True, callback=parse_sparsities, help="Comma-separated sparsity fractions")
@click.option("--detector-tokens", default=DETECTOR_TOKENS, show_default=True, type=click.IntRange(min=1), help="Detector tokens per layer")
@click.option("--detector-layers", default=DETECTOR_LAYERS, show_default=True, type=click.IntRange(min=0), help="Detector layers")
@click.option("--bavit-tokens", default=BAVIT_TOKENS, show_default=True, type=click.IntRange(min=0), help="Classifier tokens per layer for the table; measured runs use the checkpoint's token grid")
@click.option("--bavit-layers", default=BAVIT_LAYERS, show_default=True, type=click.IntRange(min=0), help="Classifier layers")
@click.option("--format", "output_format", type=click.Choice(["text", "json"]), default="text", show_default=True, help="Output format")
@click.option("--ckpt", type=click.Path(dir_okay=False), help="Measure sparsity with this checkpoint")
@click.option("--data", type=click.Path(file_okay=False), help="Corpus to measure on (with --ckpt)")
@click.option("--theta", default=0.5, show_default=True, type=click.FloatRange(0, 1), help="P(BG) pruning threshold")
@click.option("--target-sparsity", type=click.FloatRange(0, 1, max_open=True), help="Calibrate theta to this mean sparsity")
@click.option("--batch", default=DEFAULT_BATCH_SIZE, show_default=True, type=click.IntRange(min=1), help="Batch size")
@cca_options
def prune_report_cmd(sparsities, detector_tokens, detector_layers, bavit_tokens, bavit_layers, output_format, ckpt, data, theta, target_sparsity, batch, use_cca, cca_steps, cca_threshold):
    """Layer-weighted token reduction for pruning at given sparsities."""
    if (ckpt is None) != (data is None):
        raise click.UsageError("--ckpt and --data must be given together")

    rows = reduction_table(sparsities, detector_tokens, detector_layers, bavit_tokens, bavit_layers)
    measured = None
    if ckpt:
        measured = _measure_reduction(
            ckpt,
            data,
            theta,
            target_sparsity,
            cca_config_from(use_cca, cca_steps, cca_threshold),
            detector_tokens,
            detector_layers,
            bavit_layers,
            batch,
        )
        source = click.get_current_context().get_parameter_source("bavit_tokens")
        if source is not ParameterSource.DEFAULT and bavit_tokens != measured["bavit_tokens"]:
            logger.warning(
                f"--bavit-tokens {bavit_tokens} applies to the table only; the measured run "
                f"uses the checkpoint's {measured['bavit_tokens']} tokens"
            )

    if output_format == "json":
        click.echo(
            json.dumps(
                {"rows": [r.to_dict() for r in rows], "measured": measured},
                indent=2,
                sort_keys=True,
            )
        )
        return

    table = Table(box=box.ROUNDED, title="token reduction")
    for column in ("sparsity", "bavit", "detector", "detector pruned", "detector+bavit", "reduction"):
        table.add_column(column, justify="right")
    for r in rows:
        table.add_row(
            f"{100 * r.sparsity:g}%",
            str(r.bavit_tokens),
            str(r.detector_tokens),
            str(r.pruned_detector_tokens),
            str(r.combined_tokens),
            f"{100 * r.reduction_pct:.3f}%",
        )
    console.print(table)
    if measured:
        console.print(
            f"measured over {measured['images']} images at theta {measured['theta']:.4f}: "
            f"mean sparsity {100 * measured['mean_sparsity']:.2f}%, "
            f"reduction {100 * measured['reduction_pct']:.2f}%"
        )


@cli.command("viz")
@click.option("--ckpt", required=True, type=click.Path(dir_okay=False), help="Checkpoint path")
@click.option("--image", "image_path", required=True, type=click.Path(dir_okay=False), help="PPM image")
@click.option("--theta", default=0.5, show_default=True, type=click.FloatRange(0, 1), help="P(BG) pruning threshold")
@click.option("--alpha", default=0.45, show_default=True, type=click.FloatRange(0, 1), help="Overlay tint opacity")
@click.option("--grid-lines", is_flag=True, help="Draw patch borders on the overlay")
@cca_options
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Output directory")
def viz(ckpt, image_path, theta, alpha, grid_lines, use_cca, cca_steps, cca_threshold, out):
    """Render the FG/BG overlay and the sparse (pruned-white) image."""
    checkpoint = load_checkpoint(ckpt)
    config = checkpoint.config
    grid = config.grid
    pixels = resize_image(read_ppm(image_path), grid.image_width, grid.image_height)

    probs = predict_probs(checkpoint.params, config, normalize(to_float(pixels)[None]))[0]
    mask = mask_from_probs(probs, grid, theta)
    cca_config = cca_config_from(use_cca, cca_steps, cca_threshold)
    if cca_config is not None:
        mask = PruneMask.from_label_map(cca(mask.as_label_map(), cca_config))

    spec = RenderSpec(alpha=alpha, grid_lines=grid_lines)
    stem = os.path.splitext(os.path.basename(image_path))[0]
    os.makedirs(out, exist_ok=True)
    overlay_path = os.path.join(out, f"{stem}_overlay.ppm")
    sparse_path = os.path.join(out, sparse_filename(stem, mask.sparsity))
    write_image(overlay_path, render_overlay(pixels, mask.as_label_map(), spec))
    write_image(sparse_path, render_sparse(pixels, mask, spec))

    console.print(f"FG patches: {grid.tokens - mask.pruned}/{grid.tokens}, sparsity {100 * mask.sparsity:.1f}%")
    console.print(f"Wrote {overlay_path}")
    console.print(f"Wrote {sparse_path}")


if __name__ == "__main__":
    cli()
