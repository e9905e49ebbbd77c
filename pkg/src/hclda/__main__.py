import sys

from hclda.cli import main

sys.exit(main())
