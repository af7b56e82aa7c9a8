"""Write the averaged path-loss exponent table and its interpolation error."""

import sys

import numpy as np

from hexloc import channel


def main(path="eta_table.csv", d2d_max=1200.0):
    table = channel.build_eta_table((1.0, float(d2d_max)))
    table.to_csv(path)
    rng = np.random.default_rng(0)
    d = rng.uniform(1.0, d2d_max, 100_000)
    h = rng.uniform(channel.H_MIN, channel.H_MAX, d.size)
    err = np.abs(table.lookup(d, h) - channel.mean_path_loss_exponent(d, h))
    print(f"wrote {path}: {table.values.shape}, max |error| {err.max():.2e}, mean {err.mean():.2e}")


if __name__ == "__main__":
    main(*sys.argv[1:])
