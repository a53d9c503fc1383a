"""Python bindings for the sew workflow toolkit."""

from ._core import (
    CompletionBackend,
    EchoBackend,
    ParseError,
    ReplayBackend,
    ScriptedBackend,
    SewError,
    StepSpec,
    WorkflowIR,
    assemble_prompt,
    compute_rates,
    default_template,
    extract_code,
    parse,
    pass_at_k,
    run_candidate,
    run_command,
    run_sew,
    schemes,
    serialize,
    transcode,
    validate,
)

__all__ = [
    "CompletionBackend",
    "EchoBackend",
    "ParseError",
    "ReplayBackend",
    "ScriptedBackend",
    "SewError",
    "StepSpec",
    "WorkflowIR",
    "assemble_prompt",
    "compute_rates",
    "default_template",
    "extract_code",
    "parse",
    "pass_at_k",
    "run_candidate",
    "run_command",
    "run_sew",
    "schemes",
    "serialize",
    "transcode",
    "validate",
]
