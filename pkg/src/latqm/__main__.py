import sys

from latqm.cli import main

sys.exit(main())
