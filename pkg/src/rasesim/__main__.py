import sys

from rasesim.cli import main

sys.exit(main())
