import asyncio
import json
import logging
import time
from pathlib import Path
from typing import List, Optional, Tuple

import click

from services.classifier import InteractionClassifier, load_device_profiles
from services.dot_renderer import DotRenderer, RenderOptions
from services.dsl_parser import IrvoParser, to_json
from services.irvo_model import IrvoModel
from services.task_mapper import TaskMapper, load_tree
from services.validator import IrvoValidator, Severity
from utils.config import Settings
from utils.errors import InvalidTaskTree, IrvoError, IrvoParseError
from utils.exit_codes import ExitCode
from utils.logging_config import setup_logging
from utils.model_cache import ModelCache

logger = logging.getLogger(__name__)
perf_logger = logging.getLogger("performance")

SEVERITIES = [severity.value for severity in Severity]


class CheckOutcome:
    def __init__(self, code: ExitCode, output: str = "", errors: str = ""):
        self.code = code
        self.output = output
        self.errors = errors


def _format_diagnostics(error: IrvoParseError) -> str:
    if not error.diagnostics:
        return f"{error.source}: error: {error}"
    return "\n".join(f"{error.source}:{d}" for d in error.diagnostics)


@click.group()
@click.option("--log-level", default="WARNING", show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
@click.option("--log-dir", type=click.Path(file_okay=False), default=None, help="Also write irvo.log here.")
@click.pass_context
def cli(ctx, log_level, log_dir):
    """IRVO mixed-reality interaction models: check, merge, classify, render."""
    settings = Settings(log_level=log_level.upper(), log_dir=log_dir)
    setup_logging(settings.log_level, settings.log_dir)
    ctx.obj = {"settings": settings, "cache": ModelCache(settings.cache_entries)}


@cli.command()
@click.argument("paths", nargs=-1, required=True, type=click.Path(path_type=Path))
@click.option("--format", "output_format", type=click.Choice(["text", "json"]), default=None,
              help="Report format  [default: text]")
@click.option("--severity-threshold", type=click.Choice(SEVERITIES), default=None,
              help="Hide findings below this severity; the exit code still counts every Error.  [default: Info]")
@click.pass_context
def check(ctx, paths, output_format, severity_threshold):
    """Lint one or more .irvo files."""
    settings: Settings = ctx.obj["settings"]
    cache: ModelCache = ctx.obj["cache"]
    output_format = output_format or settings.output_format
    threshold = Severity(severity_threshold or settings.severity_threshold)
    validator = IrvoValidator()
    start_time = time.time()

    def check_one(path: Path) -> CheckOutcome:
        try:
            model = cache.load(path)
        except OSError as e:
            return CheckOutcome(ExitCode.INPUT_ERROR, errors=f"{path}: error: {e.strerror or e}")
        except IrvoParseError as e:
            return CheckOutcome(ExitCode.INPUT_ERROR, errors=_format_diagnostics(e))
        except IrvoError as e:
            return CheckOutcome(ExitCode.INPUT_ERROR, errors=f"{path}: error {e.code}: {e}")
        report = validator.check(model)
        if output_format == "json":
            output = report.to_json(threshold)
        else:
            output = report.to_text(threshold)
        code = ExitCode.FINDINGS if report.has_errors else ExitCode.SUCCESS
        return CheckOutcome(code, output=output)

    async def check_all() -> List[CheckOutcome]:
        semaphore = asyncio.Semaphore(settings.max_workers)

        async def bounded(path: Path) -> CheckOutcome:
            async with semaphore:
                return await asyncio.to_thread(check_one, path)

        return await asyncio.gather(*(bounded(path) for path in paths))

    outcomes = asyncio.run(check_all())

    documents = []
    for outcome in outcomes:
        if outcome.errors:
            click.echo(outcome.errors, err=True)
        if not outcome.output:
            continue
        if output_format == "json":
            documents.append(json.loads(outcome.output))
        else:
            click.echo(outcome.output)
    if output_format == "json" and documents:
        click.echo(json.dumps(documents[0] if len(paths) == 1 else documents, indent=2, ensure_ascii=False))

    code = ExitCode.worst(outcome.code for outcome in outcomes)
    perf_logger.info(f"check: {len(paths)} file(s) in {time.time() - start_time:.3f}s, cache {cache.stats()}")
    logger.debug(f"check exit {int(code)}: {code.description}")
    ctx.exit(int(code))


@cli.command()
@click.argument("tree_path", type=click.Path(path_type=Path))
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Write the root model here instead of standard output.")
@click.option("--per-node", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Also write <task>.irvo for every synthesized task into this directory.")
@click.pass_context
def merge(ctx, tree_path, out, per_node):
    """Merge the diagrams linked in an irvo-tree/1 file up to the root task."""
    cache: ModelCache = ctx.obj["cache"]
    parser = IrvoParser()
    mapper = TaskMapper()
    start_time = time.time()

    try:
        tree, links = load_tree(tree_path, cache)
        synthesized = mapper.synthesize(tree, links)
    except OSError as e:
        click.echo(f"{tree_path}: error: {e.strerror or e}", err=True)
        ctx.exit(int(ExitCode.INPUT_ERROR))
    except IrvoParseError as e:
        click.echo(_format_diagnostics(e), err=True)
        ctx.exit(int(ExitCode.INPUT_ERROR))
    except InvalidTaskTree as e:
        click.echo(f"error {e.code}: {e}", err=True)
        ctx.exit(int(ExitCode.INPUT_ERROR))
    except IrvoError as e:
        click.echo(f"{tree_path}: error {e.code}: {e}", err=True)
        ctx.exit(int(ExitCode.FINDINGS))

    root_model = synthesized[tree.root.id]
    text = parser.serialize(root_model)
    if out is not None:
        out.write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)
    if per_node is not None:
        per_node.mkdir(parents=True, exist_ok=True)
        for task_id, model in sorted(synthesized.items()):
            (per_node / f"{task_id}.irvo").write_text(parser.serialize(model), encoding="utf-8")

    for finding in mapper.odd_configurations(root_model, dict(links)):
        click.echo(f"{tree_path}: {finding}", err=True)
    for note in mapper.notes:
        click.echo(f"{tree_path}: note: {note}", err=True)

    perf_logger.info(f"merge: {len(synthesized)} task model(s) in {time.time() - start_time:.3f}s")
    ctx.exit(int(ExitCode.SUCCESS))


@cli.command()
@click.argument("path", type=click.Path(path_type=Path))
@click.option("--profiles", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Device profile list, one identifier per line.")
@click.option("--format", "output_format", type=click.Choice(["text", "json"]), default="text", show_default=True)
@click.pass_context
def classify(ctx, path, profiles, output_format):
    """Print the interaction style (WIMP, VR, AR, AV, MR) of a model."""
    settings: Settings = ctx.obj["settings"]
    model, code = _load_or_report(ctx, path)
    if model is None:
        ctx.exit(int(code))

    device_profiles = settings.device_profiles
    if profiles is not None:
        try:
            device_profiles = load_device_profiles(profiles)
        except OSError as e:
            click.echo(f"{profiles}: error: {e.strerror or e}", err=True)
            ctx.exit(int(ExitCode.INPUT_ERROR))

    result = InteractionClassifier(device_profiles).classify(model)
    if output_format == "json":
        click.echo(result.to_json())
    else:
        click.echo(result.label.value)
        click.echo("cases: " + (", ".join(str(case) for case in result.cases) or "none"))
    ctx.exit(int(ExitCode.SUCCESS))


@cli.command()
@click.argument("path", type=click.Path(path_type=Path))
@click.option("--dot", "dot_path", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Write DOT here instead of standard output.")
@click.option("--show-dashed/--hide-dashed", default=None)
@click.option("--show-transducers/--hide-transducers", default=None)
@click.option("--cluster-places/--no-cluster-places", default=None)
@click.option("--json", "as_json", is_flag=True, help="Emit the irvo-json/1 projection instead of DOT.")
@click.pass_context
def render(ctx, path, dot_path, show_dashed, show_transducers, cluster_places, as_json):
    """Render a model as Graphviz DOT."""
    settings: Settings = ctx.obj["settings"]
    model, code = _load_or_report(ctx, path)
    if model is None:
        ctx.exit(int(code))

    options = RenderOptions(
        show_dashed=settings.show_dashed if show_dashed is None else show_dashed,
        show_transducers=settings.show_transducers if show_transducers is None else show_transducers,
        cluster_places=settings.cluster_places if cluster_places is None else cluster_places,
    )
    text = to_json(model) + "\n" if as_json else DotRenderer(options).to_dot(model)
    if dot_path is not None:
        dot_path.write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)
    ctx.exit(int(ExitCode.SUCCESS))


def _load_or_report(ctx, path: Path) -> Tuple[Optional[IrvoModel], ExitCode]:
    cache: ModelCache = ctx.obj["cache"]
    try:
        return cache.load(path), ExitCode.SUCCESS
    except OSError as e:
        click.echo(f"{path}: error: {e.strerror or e}", err=True)
    except IrvoParseError as e:
        click.echo(_format_diagnostics(e), err=True)
    except IrvoError as e:
        click.echo(f"{path}: error {e.code}: {e}", err=True)
    return None, ExitCode.INPUT_ERROR


if __name__ == "__main__":
    cli()
