import sys

from pyebh.cli import main

sys.exit(main())
