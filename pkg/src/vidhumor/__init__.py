"""vidhumor: curation, prompting, and evaluation for video humor
explanation."""

__version__ = "0.1.0"
