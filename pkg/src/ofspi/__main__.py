import sys

from ofspi.cli import main

sys.exit(main())
