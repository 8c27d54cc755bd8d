"""How well does SAR-EM recover the labeling mechanism as data grows?

Fits SAR-EM on synthetic blobs of increasing size and prints the test-set
MSE between learned and true propensities, next to the classifier AUC of
the EM fit and of a model trained with the true propensities.
"""

import argparse

import numpy as np

from sarpu.benchmark import evaluate_method, fit_method
from sarpu.simulate import SimulationConfig, make_blobs, make_experiment_instances


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="500,1000,2000,4000")
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--separation", type=float, default=3.0)
    args = ap.parse_args()

    print("n\tmse_e\tauc_em\tauc_true_e")
    for n in (int(s) for s in args.sizes.split(",")):
        rows = []
        for seed in range(args.seeds):
            data = make_blobs(n, 4, args.separation, seed=seed)
            inst = make_experiment_instances(data, SimulationConfig(n_splits=1, n_labelings=1, seed=seed))[0]
            em = evaluate_method(fit_method("sar-em", inst.train), inst.test, inst.test_propensity)
            oracle = evaluate_method(fit_method("sar-true-e", inst.train), inst.test, inst.test_propensity)
            rows.append((em["mse_e"], em["auc_f"], oracle["auc_f"]))
        m = np.mean(rows, axis=0)
        print(f"{n}\t{m[0]:.4f}\t{m[1]:.4f}\t{m[2]:.4f}")


if __name__ == "__main__":
    main()
