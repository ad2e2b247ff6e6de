import sys

from adaptive_levels.cli import main

sys.exit(main())
