from pydantic import BaseModel, Field, model_validator
from typing import List, Optional
from enum import Enum

CSV_COLUMNS = (
    "sc_layer",
    "bitstream_len",
    "phase",
    "accuracy",
    "num_images",
    "seed",
    "wall_time_s",
)


class ScLayer(str, Enum):
    NONE = "none"
    FIRST = "first"
    SECOND = "second"
    BOTH = "both"

    @property
    def conv_ordinals(self) -> tuple:
        """1-based convolution positions that run in the stochastic domain"""
        return {
            ScLayer.NONE: (),
            ScLayer.FIRST: (1,),
            ScLayer.SECOND: (2,),
            ScLayer.BOTH: (1, 2),
        }[self]

    @property
    def order(self) -> int:
        return list(ScLayer).index(self)


class Phase(str, Enum):
    BEFORE_ATTACK = "before_attack"
    AFTER_ATTACK = "after_attack"

    @property
    def order(self) -> int:
        return list(Phase).index(self)


class EvalRow(BaseModel):
    sc_layer: ScLayer
    bitstream_len: int = Field(..., ge=0)
    phase: Phase
    accuracy: float = Field(..., ge=0, le=1)
    num_images: int = Field(..., ge=0)
    seed: int = Field(..., ge=0)
    wall_time_s: float = Field(default=0.0, ge=0)

    @property
    def key(self) -> tuple:
        return (self.sc_layer, self.bitstream_len, self.phase)

    @property
    def sort_key(self) -> tuple:
        return (self.sc_layer.order, self.bitstream_len, self.phase.order)


class EvalReport(BaseModel):
    rows: List[EvalRow] = Field(default_factory=list)
    weights_path: Optional[str] = None
    adversarial_path: Optional[str] = None

    @model_validator(mode="after")
    def check_rows(self):
        keys = [row.key for row in self.rows]
        if len(keys) != len(set(keys)):
            raise ValueError("Each (sc_layer, bitstream_len, phase) may appear only once")
        self.rows = sorted(self.rows, key=lambda row: row.sort_key)
        return self

    def get(self, sc_layer: ScLayer, bitstream_len: int, phase: Phase) -> Optional[EvalRow]:
        for row in self.rows:
            if row.key == (sc_layer, bitstream_len, phase):
                return row
        return None


class EpochMetrics(BaseModel):
    epoch: int
    train_loss: float
    test_accuracy: Optional[float] = None
    wall_time_s: float = 0.0


class AttackSummary(BaseModel):
    attempted: int
    succeeded: int
    success_rate: float
    mean_l2: Optional[float] = None
    median_l2: Optional[float] = None
    seed: int
