import sys

from gridohm.main import main

sys.exit(main())
