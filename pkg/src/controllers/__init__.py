"""
Controllers for SuperMAN sessions.

This package contains controllers for:
- SupermanController: dataset ingestion, training, evaluation, interpretation,
  tree-metric checks and the XOR and ablation benchmarks
"""

# Import controllers so they can be imported from the controllers package
from .superman import RunConfig, SupermanController

__all__ = ["SupermanController", "RunConfig"]
