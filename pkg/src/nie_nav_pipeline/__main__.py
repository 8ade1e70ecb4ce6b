import sys

if __name__ == "__main__":
    from nie_nav_pipeline.cli import cli_main

    sys.exit(cli_main())
