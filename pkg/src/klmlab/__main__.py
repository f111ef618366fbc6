import sys

from klmlab.cli import main

sys.exit(main())
