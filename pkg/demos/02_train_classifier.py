# # Training the obstacle classifier
#
# The classifier has three softmax heads (material, surface, movement) on a
# small ReLU trunk. Here we train it on a synthetic labelled corpus and
# compare two topologies.

import time

from uasw.classifier import TrainConfig, head_accuracy, label_targets, train
from uasw.datastore import CorpusSpec, build_dataset, generate_corpus

# 200 samples of each of the 16 label combinations. Each sample is one
# buffer of 88 CIRs with the obstacle closing at walking speed.

logs = generate_corpus(CorpusSpec(per_combination=200), seed=0)
ds = build_dataset(logs, seed=0)
print("features", ds.features.shape, "train/val/test", len(ds.train), len(ds.val), len(ds.test))

xt, yt = ds.split("train")
xv, yv = ds.split("val")
xs, ys = ds.split("test")

# Early stopping watches the validation loss and keeps the best weights.

for hidden in [(), (12,), (12, 12)]:
    t0 = time.perf_counter()
    model, hist = train(xt, yt, xv, yv, hidden, TrainConfig(seed=0))
    acc = head_accuracy(model, xs, label_targets(ys))
    print(
        "hidden=%-8s best epoch %3d  %.1f s  material %.3f  surface %.3f  movement %.3f"
        % (str(hidden), hist.best_epoch, time.perf_counter() - t0, *acc)
    )

# Movement needs a hidden layer. With no hidden layer the movement head
# stays close to chance while the other two heads barely change.
