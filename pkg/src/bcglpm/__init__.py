"""Bayesian covariance graph and latent position model (BCGLPM).

Joint Gibbs inference of a sparse covariance graph among the idiosyncratic
shocks of a VAR and of two-dimensional latent node positions, plus the
simulation benchmarks and rolling-window network analyses built on top.
"""

__version__ = "0.1.0"
