"""Personalised local DP federated learning with shuffle amplification."""
