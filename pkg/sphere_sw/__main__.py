import sys

from sphere_sw.cli import main

sys.exit(main())
