"""Plot a band table written by `floquet bands` (signed cube-root scale)."""

import sys

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd


def main(path: str, out: str = "bands.png") -> None:
    table = pd.read_csv(path)
    t = table["t"].to_numpy()
    fig, ax = plt.subplots(figsize=(6, 8))
    for column in table.columns[1:]:
        ax.plot(t, np.cbrt(table[column].to_numpy()), lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("cbrt(lambda)")
    fig.tight_layout()
    fig.savefig(out, dpi=150)


if __name__ == "__main__":
    main(*sys.argv[1:])
