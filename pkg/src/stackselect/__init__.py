"""Low-rank motion assessment and reference-stack selection for multi-slice MRI stacks."""

__version__ = "0.1.0"
