"""Backport of ``enum.StrEnum`` for Python < 3.11."""

from __future__ import annotations

try:
    from enum import StrEnum
except ImportError:  # Python 3.10
    from enum import Enum

    class StrEnum(str, Enum):
        """Same str()/format() semantics as the 3.11 ``enum.StrEnum``."""

        __str__ = str.__str__
        __format__ = str.__format__

        @staticmethod
        def _generate_next_value_(name, start, count, last_values):
            return name.lower()

__all__ = ["StrEnum"]
