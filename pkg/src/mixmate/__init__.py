"""Clustering with a mixture of sparse dictionaries.

Each cluster owns a dictionary; samples are encoded against every
dictionary by an unrolled ISTA/FISTA solver, the resulting energies give a
softmax posterior over clusters, and the dictionaries are trained by
backpropagating the expected energy.
"""
__version__ = "0.1.0"
