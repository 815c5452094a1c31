def main() -> None:
    """CLI entrypoint for the hybridad console script."""
    from hybridad.cli.app import app

    app()
