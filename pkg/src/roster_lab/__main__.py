import sys

from roster_lab.cli import main

sys.exit(main())
