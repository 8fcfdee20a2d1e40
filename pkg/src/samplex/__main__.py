import sys

from samplex.cli import main

sys.exit(main())
