"""
cokernel-lab command-line entry point.

    python main.py theory --p 2 --k 2 --poly 0,1 --max-size 4
    python main.py simulate --p 2 --k 2 --poly 0,1 --n 10,20,30 --samples 100000 --out tally.json
"""

import logging
import os
import sys

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Configure logging
logging.basicConfig(
    level=getattr(logging, os.getenv('COKLAB_LOG_LEVEL', 'INFO').upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    stream=sys.stderr,
)
logger = logging.getLogger(__name__)

from src.cli import parse_and_dispatch


def main() -> int:
    return parse_and_dispatch(sys.argv[1:])


if __name__ == '__main__':
    sys.exit(main())
