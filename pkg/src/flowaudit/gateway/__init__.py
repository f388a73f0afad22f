from .backends import HttpBackend, MockBackend, MockScript, ModelResponse, TransportError, backend_from_options
from .client import Gateway
from .ledger import Rates, RunLedger
from .parsing import AnalysisParse, Verdict, parse_analysis_response, parse_verdict
from .prompts import (
    Decoding,
    PromptRequest,
    TemplateKind,
    fingerprint,
    load_few_shots,
    render_analysis_prompt,
    render_feasibility_prompt,
    value_key,
)

__all__ = [
    "AnalysisParse",
    "Decoding",
    "Gateway",
    "HttpBackend",
    "MockBackend",
    "MockScript",
    "ModelResponse",
    "PromptRequest",
    "Rates",
    "RunLedger",
    "TemplateKind",
    "TransportError",
    "Verdict",
    "backend_from_options",
    "fingerprint",
    "load_few_shots",
    "parse_analysis_response",
    "parse_verdict",
    "render_analysis_prompt",
    "render_feasibility_prompt",
    "value_key",
]
