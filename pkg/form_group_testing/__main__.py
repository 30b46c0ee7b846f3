import sys

from form_group_testing.cli import main

sys.exit(main())
