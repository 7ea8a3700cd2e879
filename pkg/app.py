#.\venv\Scripts\activate
# python app.py simulate --config data/configs/sec5.cfg --controller cbc

import sys

from src.config import configure_logging
from src.sim_cli import cli_main


if __name__ == "__main__":
    # Configure logging to file AND console
    configure_logging()
    sys.exit(cli_main(sys.argv[1:]))
