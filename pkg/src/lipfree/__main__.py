import sys

from lipfree.cli import main

sys.exit(main())
