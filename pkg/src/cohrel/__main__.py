import sys

from cohrel.cli import main

sys.exit(main())
