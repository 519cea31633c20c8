"""Entry point for gyrobs package."""

from .cli import app as cli_app


def main():
    """Run the gyrobs CLI application."""
    cli_app()


if __name__ == "__main__":
    main()
