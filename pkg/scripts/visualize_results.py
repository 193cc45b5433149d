"""
Script that reads the CSV reports under ``results/`` and plots the error rate and
Eve's knowledge across attacks, and the link budget across a parameter sweep.
"""

import argparse
import pathlib

import matplotlib.pyplot as plt
import pandas as pd
import seaborn as sns

sns.set_theme(style="whitegrid")


def attack_plot(df, save_path, show_plot=True, dpi=200):
    df = df.copy()
    df["attack_label"] = df["attack"] + " (" + df["attack_fraction"].map("{:g}".format) + ")"

    fig, axes = plt.subplots(1, 2, figsize=(14, 5), sharey=True)
    sns.barplot(data=df, y="attack_label", x="sifted_qber_true", hue="status", dodge=False, ax=axes[0])
    axes[0].axvline(df["sifted_qber_true"].min(), color="k", lw=1, ls="--")
    axes[0].set(xlabel="QBER on the sifted key", ylabel="")
    sns.barplot(data=df, y="attack_label", x="eve_known_fraction", color="tab:red", ax=axes[1])
    axes[1].set(xlabel="Fraction of the sifted key known to Eve", ylabel="")
    fig.suptitle("Error rate and eavesdropper knowledge per attack")
    fig.tight_layout()
    fig.savefig(save_path, dpi=dpi, format='png')

    if show_plot:
        plt.show()
    plt.close(fig)


def sweep_plot(df, field, save_path, show_plot=True, dpi=200):
    long_df = df.melt(id_vars=[field], value_vars=["key_rate", "background_rate", "raw_bits", "final_bits"],
                      var_name="quantity", value_name="value")
    g = sns.relplot(data=long_df, x=field, y="value", col="quantity", col_wrap=2, kind="line", marker="o",
                    facet_kws={"sharey": False}, height=3.5, aspect=1.4)
    g.set(xscale="log", yscale="symlog")
    g.figure.suptitle(f"Link budget across {field}", y=1.02)
    g.savefig(save_path, dpi=dpi, format='png')

    if show_plot:
        plt.show()
    plt.close()


if __name__ == '__main__':
    parser = argparse.ArgumentParser()
    parser.add_argument('--results_dir', type=str, default="results")
    parser.add_argument('--no_show', action='store_true')
    args = parser.parse_args()

    results = pathlib.Path(args.results_dir)
    for csv_path in sorted(results.glob("*_attack_sweep.csv")):
        attack_plot(pd.read_csv(csv_path), csv_path.with_suffix(".png"), show_plot=not args.no_show)
        print(f"Plotted {csv_path}")
    for csv_path in sorted(results.glob("linkbudget_sweep_*.csv")):
        field = csv_path.stem[len("linkbudget_sweep_"):]
        sweep_plot(pd.read_csv(csv_path), field, csv_path.with_suffix(".png"), show_plot=not args.no_show)
        print(f"Plotted {csv_path}")
