import sys

from codband.cli import main

sys.exit(main())
