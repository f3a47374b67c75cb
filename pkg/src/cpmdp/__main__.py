import sys

from cpmdp.cli import main

sys.exit(main())
