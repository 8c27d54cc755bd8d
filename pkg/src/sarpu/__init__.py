"""Learning from positive and unlabeled data under instance-dependent labeling.

Propensity-weighted risk minimization, the SAR-EM procedure, SCAR baselines and
a small simulation/benchmark harness.
"""

from sarpu.types import (
    BoundSpec,
    CostKind,
    CostSpec,
    LabeledDataset,
    LinearModel,
    PUDataset,
    validate_pu,
)

__version__ = "0.1.0"

__all__ = [
    "BoundSpec",
    "CostKind",
    "CostSpec",
    "LabeledDataset",
    "LinearModel",
    "PUDataset",
    "validate_pu",
]
