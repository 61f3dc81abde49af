import sys

from fairsynth.cli import main

sys.exit(main())
