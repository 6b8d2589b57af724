import sys

from bnlsv.cli import main

sys.exit(main())
