"""Leaf tracing, vein growing, trait extraction and GWAS for scanned leaves."""
__version__ = "0.3.0"
