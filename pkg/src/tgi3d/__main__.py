import sys

from tgi3d.cli import main

sys.exit(main())
