"""Iterative training with open-set noisy labels: pcLOF detection, hard-mined
contrastive loss and a reweighted softmax, on small numpy MLPs."""

__version__ = "0.1.0"
