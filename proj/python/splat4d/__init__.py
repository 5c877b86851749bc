# Copyright Contributors to the splat4d Project
# SPDX-License-Identifier: Apache-2.0
#
"""4D Gaussian splat scenes: rendering, per-object motion, fitting and scene files."""

from ._splat4d import *  # noqa: F401,F403
from ._splat4d import __doc__ as _native_doc  # noqa: F401

__version__ = "0.1.0"
