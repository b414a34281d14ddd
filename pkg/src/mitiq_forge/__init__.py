"""Simulation, metrics and certification toolkit for linear quantum error mitigation."""

from .certification import CertificationProbes, CertificationVerdict, PerturbationFactors, Verdict, certify
from .circuit_ir import Circuit, GateSpec, benchmark_circuit
from .metrics import MetricsReport, NoClosedForm, metrics, mitigated_proxy_bias, noise_boundary, table_metrics
from .mitigation_catalog import METHODS, MitigationPlan, build_plan, optimize_tiilm
from .noise_models import NoiseChannelSpec, NoiseKind, dephasing, noise_level, ore, re, sn
from .pauli_algebra import PrecisionContext, get_context
from .simulator import monte_carlo, simulate

__version__ = "0.1.0"

__all__ = [
    "METHODS",
    "CertificationProbes",
    "CertificationVerdict",
    "Circuit",
    "GateSpec",
    "MetricsReport",
    "MitigationPlan",
    "NoClosedForm",
    "NoiseChannelSpec",
    "NoiseKind",
    "PerturbationFactors",
    "PrecisionContext",
    "Verdict",
    "benchmark_circuit",
    "build_plan",
    "certify",
    "dephasing",
    "get_context",
    "metrics",
    "mitigated_proxy_bias",
    "monte_carlo",
    "noise_boundary",
    "noise_level",
    "optimize_tiilm",
    "ore",
    "re",
    "simulate",
    "sn",
    "table_metrics",
]
