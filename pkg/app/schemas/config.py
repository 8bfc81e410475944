from pydantic import BaseModel, Field, model_validator
from typing import List, Optional
from enum import Enum

from app.schemas.report import ScLayer

ALLOWED_BITSTREAM_LENGTHS = (8, 16, 32, 64, 128, 256, 1024)


class InferenceMode(str, Enum):
    FLOAT = "float"
    SC = "sc"


class LossKind(str, Enum):
    CROSS_ENTROPY = "cross_entropy"
    CW_OBJECTIVE = "cw_objective"


class TargetRule(str, Enum):
    NEXT_CLASS = "next_class"
    FIXED = "fixed"


class ScConfig(BaseModel):
    """Stochastic-computing settings attached to one convolution layer"""

    bitstream_len: int = Field(..., ge=1)
    activation_dim: int = Field(default=0, ge=0)
    weight_dim: int = Field(default=1, ge=0)

    class Config:
        frozen = True
        extra = "forbid"

    @model_validator(mode="after")
    def check_config(self):
        if self.bitstream_len not in ALLOWED_BITSTREAM_LENGTHS:
            raise ValueError(
                f"bitstream_len must be one of {ALLOWED_BITSTREAM_LENGTHS}, got {self.bitstream_len}"
            )
        if self.activation_dim == self.weight_dim:
            raise ValueError("activation_dim and weight_dim must differ")
        return self


class TrainConfig(BaseModel):
    epochs: int = Field(default=10, ge=1)
    batch_size: int = Field(default=64, ge=1)
    learning_rate: float = Field(default=0.01, gt=0)
    momentum: float = Field(default=0.9, ge=0, lt=1)
    seed: int = Field(default=1234, ge=0, lt=2**64)
    shuffle: bool = True
    train_subset: Optional[int] = Field(default=None, ge=1, description="Use only the first N training images")

    class Config:
        extra = "forbid"


class AttackConfig(BaseModel):
    confidence_kappa: float = Field(default=0.0, ge=0)
    binary_search_steps: int = Field(default=6, ge=1)
    max_iterations: int = Field(default=500, ge=1)
    step_size: float = Field(default=0.01, gt=0)
    initial_c: float = Field(default=1.0, gt=0)
    c_growth: float = Field(default=2.0, gt=1)
    abort_early: bool = False
    target_rule: TargetRule = TargetRule.NEXT_CLASS
    fixed_target: Optional[int] = Field(default=None, ge=0)

    class Config:
        extra = "forbid"

    @model_validator(mode="after")
    def check_target(self):
        if self.target_rule == TargetRule.FIXED and self.fixed_target is None:
            raise ValueError("target_rule 'fixed' requires fixed_target")
        return self

    def target_for(self, true_label: int, num_classes: int) -> int:
        if self.target_rule == TargetRule.FIXED:
            return int(self.fixed_target)
        return (int(true_label) + 1) % num_classes


class EvalConfig(BaseModel):
    layers: List[ScLayer] = Field(default_factory=lambda: [ScLayer.NONE, ScLayer.FIRST, ScLayer.SECOND])
    lengths: List[int] = Field(default_factory=lambda: [8, 16, 32, 64, 256, 1024])
    subset_size: int = Field(default=1000, ge=1)

    class Config:
        extra = "forbid"

    @model_validator(mode="after")
    def check_grid(self):
        bad = [n for n in self.lengths if n not in ALLOWED_BITSTREAM_LENGTHS]
        if bad:
            raise ValueError(f"Unsupported bit-stream lengths {bad}; choose from {ALLOWED_BITSTREAM_LENGTHS}")
        return self


class BenchConfig(BaseModel):
    lengths: List[int] = Field(default_factory=lambda: [8, 16, 32, 64, 128, 256, 1024])
    pairs: int = Field(default=1000, ge=1)
    max_error: Optional[float] = Field(default=None, gt=0)

    class Config:
        extra = "forbid"

    @model_validator(mode="after")
    def check_lengths(self):
        if any(n < 1 for n in self.lengths):
            raise ValueError("Bit-stream lengths must be positive")
        return self
