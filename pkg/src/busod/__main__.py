import sys

from busod.cli import main

sys.exit(main())
