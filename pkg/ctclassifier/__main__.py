import sys

from ctclassifier.cli import main

sys.exit(main())
