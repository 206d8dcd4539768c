import sys

from specmat.cli import main

sys.exit(main())
