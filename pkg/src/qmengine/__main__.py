import sys

from qmengine.cli import main

sys.exit(main())
