"""Power budgets for oxygen-consuming microscopic robots circulating in blood."""

__version__ = "0.1.0"
