"""Land-cover classification with kernel SVMs, Gaussian maximum likelihood and
backprop networks, plus spectral destriping and accuracy statistics."""

__version__ = "0.1.0"
