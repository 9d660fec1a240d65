"""CLI: `scorer-sidecar serve --config sidecar.json`."""

from __future__ import annotations

from pathlib import Path

import click

from scorer_sidecar.app import create_app
from scorer_sidecar.config import load_config


@click.group()
def main():
    """Scorer service for the prompt-safety gateway."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def serve(config_path):
    """Serve /score for the configured checkpoint or stub."""
    import uvicorn

    config = load_config(config_path)
    app = create_app(config, base_dir=Path(config_path).parent)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")


if __name__ == "__main__":
    main()
