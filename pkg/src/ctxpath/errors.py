"""Exception and warning types shared across the package."""


class PatchTooLarge(ValueError):
    """Requested patch size exceeds the image dimensions."""


class OutOfGrid(IndexError):
    """Grid coordinate outside the tiling."""


class BlockTooLarge(ValueError):
    """Context block does not fit inside the patch grid."""


class DimMismatch(ValueError):
    """Vector or matrix dimensions disagree."""


class InsufficientSamples(ValueError):
    """Too few rows to fit the requested decomposition."""


class SingleClassData(ValueError):
    """Training data contains only one class."""


class EmptyDataset(ValueError):
    """No usable records in the dataset."""


class ImageTooSmall(ValueError):
    """Image does not admit a single context block under the config."""


class TooFewSamples(ValueError):
    """A class has too few samples for a stratified split."""


class BadMagic(ValueError):
    """Feature store file does not start with the expected magic bytes."""


class UnsupportedVersion(ValueError):
    """Feature store version not understood by this reader."""


class CorruptRecord(ValueError):
    """Feature store record is truncated or inconsistent."""


class DuplicateKey(ValueError):
    """Two store entries share an (image_id, augmentation) key."""


class MissingFeatures(LookupError):
    """No store entry for the requested (image_id, augmentation) key."""


class VersionMismatch(ValueError):
    """Serialized model carries an unsupported format version."""


class SchemaViolation(ValueError):
    """Serialized model or manifest does not match the documented schema."""


class ManifestError(ValueError):
    """Dataset manifest fails schema validation."""


class DegenerateChannelWarning(UserWarning):
    """A source channel had (near-)zero spread; it was pinned to the target mean."""


class DegenerateDataWarning(UserWarning):
    """Input data carried no variance; a trivial model was returned."""


class ConvergenceWarning(UserWarning):
    """Iterative solver hit its pass budget before reaching tolerance."""
