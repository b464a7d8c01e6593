import sys

from tsloc.harness.cli import main

sys.exit(main())
