from fractions import Fraction
from pathlib import Path
from typing import Annotated, Any, List, Literal, Optional, Tuple

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer


def parse_rational(value: Any) -> Any:
    if isinstance(value, str):
        num, _, den = value.partition("/")
        return Fraction(int(num), int(den or 1))
    if isinstance(value, int):
        return Fraction(value)
    return value


def format_rational(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


# Exact rational, exported as "num/den"
Rational = Annotated[
    Fraction,
    BeforeValidator(parse_rational),
    PlainSerializer(format_rational, return_type=str),
]


# Validation Schemas
class Violation(BaseModel):
    check: str  # symmetry, diagonal, positivity, triangle
    x: int
    y: int
    z: Optional[int] = None
    d_xy: int
    d_yx: Optional[int] = None
    d_xz: Optional[int] = None
    d_yz: Optional[int] = None


class ValidationReport(BaseModel):
    mode: Literal["full", "structured"]
    n: int
    symmetric_ok: bool = True
    diagonal_ok: bool = True
    positivity_ok: bool = True
    triangle_ok: bool = True
    first_violation: Optional[Violation] = None
    failures: List[Violation] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.symmetric_ok and self.diagonal_ok and self.positivity_ok and self.triangle_ok


# Adversary Schemas
class InstanceReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    n: int
    delta: str
    p: int
    p_hat: int
    cost_p: int
    cost_phat: int
    lower_bound_p: int
    upper_bound_phat: int
    ratio_floor: Rational
    measured_ratio: Rational
    b_size: int
    q_total: int
    alpha_phat: int


class InstanceExport(BaseModel):
    n: int
    delta: str
    S: List[int]
    B: List[int]
    p_hat: int
    p: int
    q_total: int
    frozen: List[Tuple[int, int, int]]


# Harness Schemas
class RunRecord(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    n: int
    delta: str
    algorithm: str
    q_total: Optional[int] = None
    redundant_queries: Optional[int] = None
    b_size: Optional[int] = None
    alpha_phat: Optional[int] = None
    cost_p: Optional[int] = None
    cost_phat: Optional[int] = None
    cost_opt: Optional[int] = None
    measured_ratio: Optional[Rational] = None
    ratio_floor: Optional[Rational] = None
    wall_time_ms: Optional[int] = None
    error: Optional[str] = None


class SweepPlan(BaseModel):
    n_values: List[int]
    deltas: List[str]
    algorithms: List[str]
    out: Optional[Path] = None
    format: Literal["csv", "jsonl"] = "csv"
    budget: Optional[int] = None
    omit_timing: bool = False
    pad_heavy: bool = False


class RecoveryRecord(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    n: int
    q_size: int
    connected: bool
    l1_relative_error: Optional[Rational] = None
    z_tilde: Optional[int] = None
    cost_d_ztilde: Optional[int] = None
    cost_dq_ztilde: Optional[int] = None
    dq_norm: Optional[int] = None
    d_norm: Optional[int] = None
    z_star: Optional[int] = None
    cost_d_zstar: Optional[int] = None
    domination_ok: Optional[bool] = None
    chain_completion_ok: Optional[bool] = None
    chain_average_ok: Optional[bool] = None
    chain_norm_ok: Optional[bool] = None
    error: Optional[str] = None
