#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright 2019-2023 Marco Favorito, Roberto Cipollone, Luca Iocchi
#
# ------------------------------
#
# This file is part of gym-consensus.
#
# gym-consensus is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# gym-consensus is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with gym-consensus.  If not, see <https://www.gnu.org/licenses/>.
#

"""
Check that every Python file of the repository starts with the license notice.

The notice is made of:
- (optional) the Python shebang;
- the encoding header;
- the copyright and license notices.
"""

import argparse
import itertools
import re
import sys
from pathlib import Path

HEADER_REGEX = r"""(#!/usr/bin/env python3
)?# -\*- coding: utf-8 -\*-
#
# Copyright 2019-2023 Marco Favorito, Roberto Cipollone, Luca Iocchi
#
# ------------------------------
#
# This file is part of gym-consensus\.
#
# gym-consensus is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# \(at your option\) any later version\.
#
# gym-consensus is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE\.  See the
# GNU General Public License for more details\.
#
# You should have received a copy of the GNU General Public License
# along with gym-consensus\.  If not, see <https://www\.gnu\.org/licenses/>\.
#
"""
SOURCE_DIRECTORIES = ("gym_consensus", "tests", "scripts")


def check_copyright(file: Path) -> bool:
    """
    Check that a file starts with the license notice.

    :param file: the file to check.
    :return: True if the file has the encoding header and the notice,
      optionally prefixed by the shebang.
    """
    content = file.read_text(encoding="utf-8")
    return re.match(re.compile(HEADER_REGEX, re.MULTILINE), content) is not None


def parse_args():
    """Parse arguments."""
    parser = argparse.ArgumentParser("check_copyright_notice")
    parser.add_argument(
        "--directory", type=str, default=".", help="The path to the repository root."
    )
    return parser.parse_args()


if __name__ == "__main__":
    root = Path(parse_args().directory)
    python_files = itertools.chain.from_iterable(
        (root / directory).glob("**/*.py") for directory in SOURCE_DIRECTORIES
    )
    bad_files = [filepath for filepath in python_files if not check_copyright(filepath)]

    if len(bad_files) > 0:
        print("The following files are not well formatted:")
        print("\n".join(map(str, bad_files)))
        sys.exit(1)
    print("OK")
    sys.exit(0)
