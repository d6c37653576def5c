import sys

from edgedpp.cli import main

sys.exit(main())
