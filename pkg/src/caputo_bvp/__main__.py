import sys

from caputo_bvp.cli import main

sys.exit(main())
