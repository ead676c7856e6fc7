from .generate import GenConfig, generate_llm_batch, generate_one, method_tag
from .parse import POLICIES, REJECT, REPAIR, ParsedResponse, first_json_object, parse_response
from .prompt import (
    INSTANCE_MARKER,
    REQUIRED_PLACEHOLDERS,
    PromptSpec,
    build_prompt,
    default_exemplars,
    default_template,
)
from .transport import (
    API_KEY_ENV,
    RETRY_MARKER,
    FailingTransport,
    HttpTransport,
    LlmTransport,
    MockTransport,
    TransportConfig,
)

__all__ = [
    "GenConfig", "generate_llm_batch", "generate_one", "method_tag", "POLICIES", "REJECT",
    "REPAIR", "ParsedResponse", "first_json_object", "parse_response", "INSTANCE_MARKER",
    "REQUIRED_PLACEHOLDERS", "PromptSpec", "build_prompt", "default_exemplars",
    "default_template", "API_KEY_ENV", "RETRY_MARKER", "FailingTransport", "HttpTransport",
    "LlmTransport", "MockTransport", "TransportConfig",
]
