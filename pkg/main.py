import sys

from busyq.cli.main import main

if __name__ == "__main__":
    sys.exit(main())
