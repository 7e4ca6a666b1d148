"""Plot the |Delta| profile written by `floquet determinant` on a log scale."""

import sys

import matplotlib.pyplot as plt
import pandas as pd


def main(path: str, out: str = "determinant.png") -> None:
    profile = pd.read_csv(path)
    profile = profile[profile["status"] == "ok"]
    fig, ax = plt.subplots(figsize=(8, 4))
    for t, rows in profile.groupby("t"):
        ax.semilogy(rows["lambda"], rows["abs_normalized"], label=f"t = {t:g}")
    ax.set_xlabel("lambda")
    ax.set_ylabel("|Delta| / max")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=150)


if __name__ == "__main__":
    main(*sys.argv[1:])
