"""Quarter-label arithmetic (YYYYQn)."""

from __future__ import annotations

import re

_QUARTER_RE = re.compile(r"^(\d{4})Q([1-4])$")


def parse_quarter(label: str) -> tuple[int, int]:
    m = _QUARTER_RE.match(label)
    if m is None:
        raise ValueError(f"bad quarter label {label!r}, expected YYYYQn with n in 1..4")
    return int(m.group(1)), int(m.group(2))


def quarter_index(label: str) -> int:
    """Map a label onto a contiguous integer axis (1 step = 1 quarter)."""
    year, q = parse_quarter(label)
    return year * 4 + (q - 1)


def quarter_label(index: int) -> str:
    return f"{index // 4}Q{index % 4 + 1}"


def quarter_range(first: str, last: str) -> list[str]:
    """Inclusive contiguous run of labels from first to last."""
    i0, i1 = quarter_index(first), quarter_index(last)
    if i1 < i0:
        raise ValueError(f"quarter range end {last} precedes start {first}")
    return [quarter_label(i) for i in range(i0, i1 + 1)]


def shift_quarter(label: str, steps: int) -> str:
    return quarter_label(quarter_index(label) + steps)
