import sys

from quadfem.cli import main

sys.exit(main())
