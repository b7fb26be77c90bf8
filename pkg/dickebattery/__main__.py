#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""Alternative entry point for python -m dickebattery execution.

Usage:
    python -m dickebattery onoff --config dickebattery.yaml

This is equivalent to:
    dickebattery onoff --config dickebattery.yaml
"""

import sys

from dickebattery.cli import main


if __name__ == "__main__":
    sys.exit(main())
