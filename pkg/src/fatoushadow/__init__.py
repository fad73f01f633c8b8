"""Blaschke-product dynamics, Poincare-disk geometry and preimage-tree shadowing."""
