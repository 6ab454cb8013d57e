import sys


def main(argv: list[str] | None = None) -> int:
    from src.app import EchoFieldApp

    app = EchoFieldApp(sys.argv[1:] if argv is None else argv)

    try:
        exit_code = app.run()
    finally:
        app.cleanup()

    return exit_code


if __name__ == "__main__":
    sys.exit(main())
