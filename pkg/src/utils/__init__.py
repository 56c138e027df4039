"""
Utility modules for the SuperMAN toolkit.

This package contains the file formats: canonical dataset and checkpoint JSON,
run manifests, measurement CSV ingestion and plot-data CSV export.
"""

from .csv_export import write_history_csv, write_measurements_csv, write_rows
from .csv_import import IngestSchema, ingest_csv, read_matrix_csv
from .json_export import (
    export_dataset,
    import_dataset,
    load_checkpoint,
    save_checkpoint,
    write_manifest,
)

__all__ = [
    'IngestSchema',
    'ingest_csv',
    'read_matrix_csv',
    'write_rows',
    'write_history_csv',
    'write_measurements_csv',
    'export_dataset',
    'import_dataset',
    'load_checkpoint',
    'save_checkpoint',
    'write_manifest',
]
