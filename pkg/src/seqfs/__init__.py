"""Sequential (tree -> RFECV -> RFE) feature selection for expression matrices."""

from .dataset import (ExpressionMatrix, FoldPlan, LabeledDataset, SyntheticSpec, generate_synthetic, load_tsv,
                      stratified_kfold, stratified_split, write_tsv)
from .errors import ConfigError, DataError, SeqfsError
from .seeding import derive_seed

__version__ = "0.1.0"

__all__ = [
    "ExpressionMatrix", "LabeledDataset", "FoldPlan", "SyntheticSpec", "generate_synthetic", "load_tsv",
    "write_tsv", "stratified_kfold", "stratified_split", "SeqfsError", "DataError", "ConfigError", "derive_seed",
]
