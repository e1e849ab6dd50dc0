"""Label preprocessing shared by node matching and text-level scoring."""

from __future__ import annotations

import re

# Subfigure markers: a lowercase letter with optional parentheses/period,
# e.g. "(a)", "a)", "b.", "(c)."
_SUBFIGURE = re.compile(r"^\(?[a-z]\)?\.?$")


def filter_label(text: str) -> str | None:
    """Return the trimmed label, or None when it is evaluation noise.

    Filtered out: isolated single characters, pure digit strings, and
    subfigure markers. Idempotent on its own output.
    """
    trimmed = text.strip()
    if not trimmed:
        return None
    if len(trimmed) == 1:
        return None
    if trimmed.isdigit():
        return None
    if _SUBFIGURE.match(trimmed):
        return None
    return trimmed
