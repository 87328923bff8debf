"""scikit-learn style wrapper around the fusion pipeline.

``fit`` estimates the dark-channel exponent from (hazy, clear) image pairs;
``transform`` fuses (visible, infrared) pairs with the fitted exponent.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .fusion import FusionConfig, fuse_pipeline
from .transmission import DEFAULT_BETA, fit_beta


class DIPFusion(TransformerMixin, BaseEstimator):
    """Infrared/visible fusion as a transformer.

    Parameters mirror :class:`~dipf.fusion.FusionConfig`. With
    ``fit_beta=False`` (or when ``fit`` gets no targets) the ``beta``
    parameter is used unchanged.

    Attributes
    ----------
    beta_ : float
        Exponent used by ``transform``.
    beta_identifiable_ : bool
        False when the training pairs carried no information on beta.
    diagnostics_ : list of dict
        Diagnostics of the most recent ``transform`` call, one per pair.
    """

    def __init__(
        self,
        beta=DEFAULT_BETA,
        fit_beta=True,
        eta=0.1,
        kl_threshold=0.05,
        gamma_mpc=1.5,
        blend_denoised=False,
    ):
        self.beta = beta
        self.fit_beta = fit_beta
        self.eta = eta
        self.kl_threshold = kl_threshold
        self.gamma_mpc = gamma_mpc
        self.blend_denoised = blend_denoised

    def _config(self, beta):
        return replace(
            FusionConfig(),
            beta=beta,
            eta=self.eta,
            kl_threshold=self.kl_threshold,
            gamma_mpc=self.gamma_mpc,
            blend_denoised=bool(self.blend_denoised),
        )

    def fit(self, X=None, y=None):
        """Fit beta on hazy images ``X`` against clear images ``y``."""
        # validates every parameter before any work is done
        self._config(self.beta)
        if self.fit_beta and X is not None and y is not None:
            X, y = list(X), list(y)
            if len(X) != len(y):
                raise ValueError(f"got {len(X)} hazy and {len(y)} clear images")
            fitted = fit_beta(zip(X, y))
            self.beta_ = fitted.beta
            self.beta_identifiable_ = fitted.identifiable
        else:
            self.beta_ = float(self.beta)
            self.beta_identifiable_ = True
        return self

    def transform(self, X):
        """Fuse each ``(visible, infrared)`` pair; returns a list of images."""
        check_is_fitted(self, "beta_")
        cfg = self._config(self.beta_)
        fused, self.diagnostics_ = [], []
        for vis, ir in X:
            res = fuse_pipeline(vis, ir, cfg)
            fused.append(res.fused)
            self.diagnostics_.append(res.diagnostics)
        return fused

    def fuse(self, vis, ir):
        """Fuse a single pair and return the image."""
        return self.transform([(vis, ir)])[0]

    def score(self, X, y=None):
        """Mean edge-transfer score ``q_g`` of the fused images against their sources."""
        from .metrics import q_g

        pairs = list(X)
        fused = self.transform(pairs)
        return float(np.mean([q_g(v, i, f) for (v, i), f in zip(pairs, fused)]))
