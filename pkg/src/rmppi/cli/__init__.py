import configparser
import logging
import sys

import click
from rich.logging import RichHandler

from rmppi.errors import RmppiError, exit_code_for
from rmppi.harness.cli import commands

logger = logging.getLogger(__name__)


class RmppiGroup(click.Group):
    """Maps package errors to exit codes: 2 acceptance, 3 artifact I/O, 1 otherwise."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except RmppiError as e:
            logger.error(str(e), exc_info=ctx.params.get("debug", False))
            sys.exit(exit_code_for(e))


@click.group(cls=RmppiGroup)
@click.option("--debug", is_flag=True, help="Enable debug logging.")
def cli(debug):
    from rmppi import config as _config

    debug = debug or _config.getboolean("app", "debug", fallback=False)
    quiet = logging.WARNING if debug else logging.ERROR
    logging.basicConfig(
        level=logging.DEBUG if debug else _config.get("app", "log_level", fallback="INFO"),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[RichHandler(rich_tracebacks=True)],
    )
    logging.getLogger("matplotlib").setLevel(quiet)
    logging.getLogger("PIL").setLevel(quiet)
    logging.getLogger("click").setLevel(quiet)
    logging.getLogger("rich").setLevel(quiet)


for command in commands:
    cli.add_command(command)


def _split(section_option):
    if "." in section_option:
        return section_option.split(".", 1)
    return "app", section_option


# Get or Set configuration
@cli.command()
@click.argument("section_option", required=False)
@click.argument("value", required=False)
def config(section_option, value):
    """Show the app configuration or set SECTION.OPTION to VALUE."""
    from rmppi import config as _config
    from rmppi import config_dir, config_file

    if value is None:
        if section_option:
            section, option = _split(section_option)
            if _config.has_option(section, option):
                click.echo(f"{section}.{option} = {_config.get(section, option)}")
            else:
                click.echo(f"Configuration '{section}.{option}' not found.")
        else:
            for section in _config.sections():
                click.echo(f"[{section}]")
                for option in _config.options(section):
                    click.echo(f"{option} = {_config.get(section, option)}")
                click.echo()
        return

    if not section_option:
        click.echo("Please specify the configuration option to set in 'section.option' format.")
        return
    section, option = _split(section_option)
    if not _config.has_option(section, option):
        click.echo(f"Option '{option}' does not exist in section '{section}'.")
        return

    config_in_file = configparser.ConfigParser()
    config_dir.mkdir(parents=True, exist_ok=True)
    config_in_file.read(config_file)
    if not config_in_file.has_section(section):
        config_in_file.add_section(section)
    config_in_file.set(section, option, value)
    with open(config_file, "w") as f:
        config_in_file.write(f)
    _config.set(section, option, value)
    click.echo(f"Set {section}.{option} = {value} and saved to {config_file}")
