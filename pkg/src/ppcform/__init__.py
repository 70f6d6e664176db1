"""Distributed prescribed-performance formation control for heterogeneous
UAV/UGV teams over a faulty directed graph."""

__version__ = "0.1.0"
