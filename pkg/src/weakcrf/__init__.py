"""Weakly supervised sequence labeling with a latent-truth linear-chain CRF."""
