"""
Published persistency values for reference and comparison only.
Nothing here is used as an input to a computation.
"""

import pandas as pd

SOURCE_TAG = "paper"

# (state spec, label, P_E, P_NL, w)
PUBLISHED_ROWS = [
    ("w:3", "W3", 2, 1, 0.644),
    ("w:4", "W4", 3, 2, 0.989),
    ("dicke:4:2", "D4^2", 3, 1, 0.471),
    ("ti:4:2", "T4^2", 2, 2, 0.707),
    ("linear:4", "L4", 2, 2, 0.707),
    ("w:5", "W5", 4, 2, 0.860),
    ("dicke:5:2", "D5^2", 4, 2, 0.907),
    ("ti:5:2", "T5^2", 3, 3, 0.772),
    ("linear:5", "L5", 2, 2, 0.667),
    ("ring:5", "R5", 2, 2, 0.577),
    ("w:6", "W6", 5, 2, 0.751),
    ("dicke:6:2", "D6^2", 5, 2, 0.783),
    ("dicke:6:3", "D6^3", 5, 3, 0.978),
    ("ti:6:2", "T6^2", 4, 3, 0.644),
    ("ti:6:3", "T6^3", 3, 3, 0.644),
    ("linear:6", "L6", 2, 2, 0.547),
    ("ring:6", "R6", 3, 3, 0.707),
    ("grid:2x3:periodic", "Cl^p_2x3", 3, 3, 0.667),
    ("grid:2x3", "Cl_2x3", 3, 3, 0.707),
    ("w:7", "W7", 6, 3, 0.985),
    ("dicke:7:3", "D7^3", 6, 3, 0.968),
    ("ti:7:3", "T7^3", 4, 3, 0.514),
    ("ring:7", "R7", 3, 3, 0.667),
    ("linear:7", "L7", 3, 3, 0.707),
]


def reference_table() -> pd.DataFrame:
    """Published rows as a data frame indexed by state spec."""
    df = pd.DataFrame(PUBLISHED_ROWS, columns=["state", "label", "P_E", "P_NL", "w"])
    df["source"] = SOURCE_TAG
    return df.set_index("state")


def reference_row(spec_text: str):
    """Published values for one spec, or None when the state is not tabulated."""
    df = reference_table()
    key = spec_text.strip().lower()
    if key not in df.index:
        return None
    return df.loc[key]


def table_specs(families, n_values) -> list:
    """Tabulated specs of the given families whose size lies in n_values."""
    specs = []
    for spec, _, _, _, _ in PUBLISHED_ROWS:
        family = spec.split(":")[0]
        if family not in families:
            continue
        if spec_size(spec) in n_values:
            specs.append(spec)
    return specs


def spec_size(spec: str) -> int:
    """Number of sites of a tabulated spec."""
    fields = spec.split(":")
    if fields[0] == "grid":
        rows, cols = fields[1].split("x")
        return int(rows) * int(cols)
    return int(fields[1])
