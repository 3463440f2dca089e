import sys

from hyperlab.core.config import APP_TITLE, validate_config
from hyperlab.core.logging_config import setup_logging
from hyperlab.services import storage
from hyperlab import cli

LOG = setup_logging()


def on_startup():
    LOG.info("=" * 60)
    LOG.info("%s starting...", APP_TITLE)
    LOG.info("=" * 60)

    validate_config()
    storage.init_db()


def main(argv=None) -> int:
    on_startup()
    code = cli.main(argv)
    LOG.info("=" * 60)
    LOG.info("%s finished with exit code %d", APP_TITLE, code)
    LOG.info("=" * 60)
    return code


if __name__ == "__main__":
    sys.exit(main())
