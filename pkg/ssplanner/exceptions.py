"""
Exception hierarchy for the SSPlanner package.

The CLI maps these onto process exit codes (see ``ssplanner.ssplanner``).
"""

from typing import Any, Dict, Optional


class SSPlannerError(Exception):
    """Base class for all package errors"""


class ConfigError(SSPlannerError):
    """Invalid or incomplete run configuration"""


class CorpusError(SSPlannerError):
    """Corpus, segmentation or instance construction precondition failure"""


class DecodeError(SSPlannerError, ValueError):
    """Token id outside the vocabulary"""


class CheckpointFormatError(SSPlannerError):
    """Checkpoint file is corrupt, truncated or has an unsupported version"""


class VocabularyMismatchError(SSPlannerError):
    """Checkpoint and dataset were built with different vocabularies"""


class AlignmentError(SSPlannerError):
    """Completions and references do not cover the same instance ids"""

    def __init__(self, message: str, offending_id: Optional[str] = None):
        super().__init__(message)
        self.offending_id = offending_id


class UnsupportedExtractorError(SSPlannerError):
    """Extractor cannot run against the given model"""


class NonFiniteLossError(SSPlannerError):
    """Loss became NaN or infinite during training"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
