#!/usr/bin/env python3
"""
Script to plot a training loss history and the per-item score distribution of a report

    python plot_training_results.py --loss runs/toy.ckpt.loss.csv --report runs/report.csv
"""

# %%
import argparse

import matplotlib as mpl
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from biopars.harness.report import read_report_csv


def load_loss_history(file_path):
    """Load the step,loss CSV written by `biopars train`"""
    return pd.read_csv(file_path)


def _style(labelsize=16):
    plt.style.use('seaborn-v0_8-poster')
    mpl.rcParams['axes.edgecolor'] = '#333F4B'
    mpl.rcParams['axes.linewidth'] = 1.2
    mpl.rcParams['axes.labelweight'] = 'bold'
    mpl.rcParams['axes.titleweight'] = 'bold'
    mpl.rcParams['xtick.labelsize'] = labelsize
    mpl.rcParams['ytick.labelsize'] = labelsize
    mpl.rcParams['legend.fontsize'] = labelsize
    mpl.rcParams['font.family'] = 'DejaVu Sans'


def plot_loss_curve(df, vocab_size=None, save_path="training_loss.png", show=True):
    """Line plot of the training loss with an optional uniform-model reference line"""
    _style()
    plt.figure(figsize=(18, 9))
    plt.plot(df['step'], df['loss'], color='#0072B2', linewidth=3, alpha=0.85, label='Batch loss')

    # Rolling mean smooths out the batch sampling noise
    window = max(1, len(df) // 20)
    plt.plot(df['step'], df['loss'].rolling(window, min_periods=1).mean(), color='#E69F00', linewidth=3,
             label=f'Rolling mean ({window} steps)')
    if vocab_size:
        plt.axhline(np.log(vocab_size), color='#D7263D', linestyle='--', linewidth=3, label='Uniform model')

    plt.xlabel('Step', fontsize=20, fontweight='bold', labelpad=15)
    plt.ylabel('Cross-entropy (nats)', fontsize=20, fontweight='bold', labelpad=15)
    plt.title('Training Loss', fontsize=32, fontweight='bold', pad=30)
    plt.legend(loc='upper right', frameon=True, fancybox=True, shadow=True)
    plt.grid(True, alpha=0.25, linestyle='--')

    ax = plt.gca()
    ax.spines['top'].set_visible(False)
    ax.spines['right'].set_visible(False)
    ax.set_facecolor('#F7F7F7')

    plt.tight_layout()
    plt.savefig(save_path, dpi=300, bbox_inches='tight', transparent=False)
    if show:
        plt.show()
    print(f"Loss curve saved as {save_path}")


def plot_score_histograms(items, aggregates, save_path="score_histograms.png", show=True):
    """One histogram of per-item scores per metric, annotated with the aggregate cell"""
    _style(labelsize=14)
    metrics = list(dict.fromkeys(items['metric']))
    fig, axes = plt.subplots(1, len(metrics), figsize=(8 * len(metrics), 8), squeeze=False)

    for ax, metric in zip(axes[0], metrics):
        scores = items.loc[items['metric'] == metric, 'score']
        n, bins, _ = ax.hist(scores, bins=10, range=(0.0, 1.0), alpha=0.85, color='#4A90E2', edgecolor='#222',
                             linewidth=2)
        for i in range(len(n)):
            if n[i]:
                ax.text((bins[i] + bins[i + 1]) / 2, float(n[i]), f"{int(n[i])}", ha='center', va='bottom',
                        fontsize=14, fontweight='bold', color='#333')
        ax.set_title(f"{metric} (aggregate {aggregates.get(metric, '-')})", fontsize=20, fontweight='bold')
        ax.set_xlabel('Per-item score', fontsize=16, fontweight='bold')
        ax.spines['top'].set_visible(False)
        ax.spines['right'].set_visible(False)
        ax.set_facecolor('#F7F7F7')
    axes[0][0].set_ylabel('Number of items', fontsize=16, fontweight='bold')

    plt.tight_layout()
    plt.savefig(save_path, dpi=300, bbox_inches='tight', transparent=False)
    if show:
        plt.show()
    print(f"Histograms saved as {save_path}")


def print_statistics(items):
    """Print per-metric statistics of a report"""
    print("\n=== Score Statistics ===")
    for metric, scores in items.groupby('metric', sort=False)['score']:
        print(f"{metric:12s} n={len(scores):4d}  mean={100 * scores.mean():6.2f}  "
              f"median={100 * scores.median():6.2f}  min={100 * scores.min():6.2f}  max={100 * scores.max():6.2f}")

# %%


def main():
    """Main function to run the plotting script"""
    parser = argparse.ArgumentParser(description="Plot biopars training and scoring outputs")
    parser.add_argument("--loss", default=None, help="Loss history CSV from `biopars train`")
    parser.add_argument("--vocab-size", type=int, default=None, help="Draws the log(V) uniform-model line")
    parser.add_argument("--report", default=None, help="CSV report from `biopars score`")
    parser.add_argument("--no-show", action="store_true", help="Only save the figures")
    args = parser.parse_args()

    if args.loss is None and args.report is None:
        parser.error("nothing to plot, pass --loss and/or --report")

    if args.loss is not None:
        print("Loading loss history...")
        df = load_loss_history(args.loss)
        print(f"Loaded {len(df)} steps, final loss {df['loss'].iloc[-1]:.4f}")
        plot_loss_curve(df, args.vocab_size, show=not args.no_show)

    if args.report is not None:
        print("Loading report...")
        items, aggregates = read_report_csv(args.report)
        print_statistics(items)
        plot_score_histograms(items, aggregates, show=not args.no_show)

    print("\nPlotting complete!")


if __name__ == "__main__":
    main()
# %%
