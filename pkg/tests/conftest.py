import io

import numpy as np
import pytest

from rankcast.panel import load_universe


def panel_csv(rows):
    """Build a CSV stream from (equity_id, quarter, price, earnings) tuples;
    None renders as an empty field."""
    lines = ["equity_id,quarter,price,earnings"]
    for eid, quarter, price, earnings in rows:
        p = "" if price is None else repr(float(price))
        e = "" if earnings is None else repr(float(earnings))
        lines.append(f"{eid},{quarter},{p},{e}")
    return io.StringIO("\n".join(lines) + "\n")


def quarter_labels(start_year, n):
    out = []
    idx = start_year * 4
    for i in range(n):
        out.append(f"{(idx + i) // 4}Q{(idx + i) % 4 + 1}")
    return out


@pytest.fixture
def small_panel():
    """3 equities x 12 quarters, clean, no exclusions."""
    quarters = quarter_labels(1994, 12)
    rows = []
    rng = np.random.default_rng(5)
    for k, eid in enumerate(["AAA", "BBB", "CCC"]):
        price = 50.0 + 10 * k
        for i, q in enumerate(quarters):
            price *= 1.0 + 0.01 * rng.standard_normal()
            rows.append((eid, q, price, 1.0 + 0.1 * k + 0.05 * i))
    return load_universe(panel_csv(rows))
