"""Dataset files, configuration, annotation service and batch CLI."""

from .dataset import (
    DatasetInstance,
    export_dataset,
    import_dataset,
    instance_consistency_error,
)
from .config import WorkbenchConfig, load_config
from .convert import ConversionReport, convert_dataset
from .providers import CommandProvider, FileProvider, GroundTruthProvider
