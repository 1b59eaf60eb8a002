"""StateGraph pipelines over the numerical core"""

from .extension_flow import ExtensionState, run_extension_pipeline
from .verification_flow import run_verification

__all__ = ["ExtensionState", "run_extension_pipeline", "run_verification"]
