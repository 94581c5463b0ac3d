"""Transmit power minimization for IRS-assisted multi-user MISO downlinks."""

from .algorithms import BeamState, PhaseState, SolveTrace, ia_solve, penalty_altmin, sdr_altmin
from .channels import ChannelEstimate, ChannelSet, ScenarioConfig, degrade_csi, generate_channels, sinr
from .errors import InfeasibleProblem, SolverFailure
from .estimators import (
    FixedPhaseDesigner, InnerApproximationDesigner, PenaltyAltMinDesigner,
    RobustPenaltyAltMinDesigner, SDRAltMinDesigner,
)
from .harness import ExperimentSpec, run_experiment, total_power
from .robust import robust_penalty_altmin, robust_sdr_altmin, verify_worst_case

__all__ = [
    "BeamState", "ChannelEstimate", "ChannelSet", "ExperimentSpec", "FixedPhaseDesigner",
    "InfeasibleProblem", "InnerApproximationDesigner", "PenaltyAltMinDesigner", "PhaseState",
    "RobustPenaltyAltMinDesigner", "SDRAltMinDesigner", "ScenarioConfig", "SolveTrace",
    "SolverFailure", "degrade_csi", "generate_channels", "ia_solve", "penalty_altmin",
    "robust_penalty_altmin", "robust_sdr_altmin", "run_experiment", "sdr_altmin", "sinr",
    "total_power", "verify_worst_case",
]
