"""Exception types shared across the toolkit."""


class SoundMorphError(Exception):
    """Base class for all toolkit errors."""


class AudioFormatError(SoundMorphError):
    """Unsupported or malformed audio input (multi-channel, wrong bit depth, ...)."""


class DatasetError(SoundMorphError):
    """Dataset directory does not satisfy the expected layout or counts."""


class CheckpointError(SoundMorphError):
    """Checkpoint file is corrupt or incompatible with the requested model."""


class TrainingDivergedError(SoundMorphError):
    """A loss term became non-finite during training."""


class DegenerateClassError(SoundMorphError):
    """A class has zero intra-class distance spread; the deviation score is undefined."""
