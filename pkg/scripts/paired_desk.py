"""Supervised training on the 64-image planted-transform corpus; prints the loss curve.

    python scripts/paired_desk.py --epochs 200 --history results/paired_history.csv
"""
import argparse
import logging
import time
from dataclasses import replace
from pathlib import Path

from quadenhance.experiments import PAIRED_DESK, paired_desk_dataset
from quadenhance.train_paired import model_mean_lab_l2, train_paired, write_history


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epochs", type=int, default=PAIRED_DESK.epochs)
    ap.add_argument("--seed", type=int, default=PAIRED_DESK.seed)
    ap.add_argument("--corpus-seed", type=int, default=0)
    ap.add_argument("--dropout", type=float, default=PAIRED_DESK.dropout)
    ap.add_argument("--history", type=Path)
    ap.add_argument("--out-model", type=Path)
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    dataset, corpus = paired_desk_dataset(args.corpus_seed)
    config = replace(PAIRED_DESK, epochs=args.epochs, seed=args.seed, dropout=args.dropout)
    t0 = time.perf_counter()
    result = train_paired(dataset, config)
    losses = [loss for _, loss, _ in result.history]
    for epoch, loss, lr in result.history[:10] + result.history[10::max(1, args.epochs // 20)]:
        print(f"epoch {epoch:4d}  loss {loss:.4f}  lr {lr:.2e}")
    first10 = losses[:10]
    print(f"monotone over first 10 epochs: {all(b < a for a, b in zip(first10, first10[1:]))}")
    print(f"final epoch loss {losses[-1]:.4f}, best {min(losses):.4f}")
    print(f"eval-mode training Lab L2 {model_mean_lab_l2(result.model, corpus.inputs, corpus.targets):.4f}")
    print(f"{time.perf_counter() - t0:.0f} s")
    if args.history:
        args.history.parent.mkdir(parents=True, exist_ok=True)
        write_history(args.history, result.history)
    if args.out_model:
        result.model.save(args.out_model)


if __name__ == "__main__":
    main()
