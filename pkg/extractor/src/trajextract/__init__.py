"""Feature-trajectory extraction from denoising pipelines.

Runs a pipeline's full sampling loop, captures the configured final layer's
output at every step through a forward hook, and writes the trajectory
interchange format the scheduling toolkit consumes.
"""

from .capture import ExtractionConfig, ExtractionError, extract
from .format import write_trajectory_file
from .pipelines import PIPELINES, PipelineSpec

__version__ = "0.1.0"
