"""Pure-Python versions of the mapping-table kernels.

A table is a 2-D int array; each row is a mapping over a fixed column
order, with -1 marking an unbound variable.
"""
import numpy as np


def join_rows(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    width = left.shape[1]
    out = []
    rrows = right.tolist()
    for a in left.tolist():
        for b in rrows:
            merged = []
            for x, y in zip(a, b):
                if x == -1:
                    merged.append(y)
                elif y == -1 or x == y:
                    merged.append(x)
                else:
                    break
            else:
                out.append(merged)
    return np.array(out, dtype=np.intc).reshape(len(out), width)


def minus_mask(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    rrows = right.tolist()
    keep = []
    for a in left.tolist():
        hit = False
        for b in rrows:
            for x, y in zip(a, b):
                if x != -1 and y != -1 and x != y:
                    break
            else:
                hit = True
                break
        keep.append(not hit)
    return np.array(keep, dtype=bool)
