import sys

from lw_lab.cli import main

sys.exit(main())
