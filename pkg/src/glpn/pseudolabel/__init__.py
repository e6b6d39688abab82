from glpn.pseudolabel.client import (
    ChatClient,
    EndpointConfig,
    FixtureError,
    PseudoLabelSet,
    PseudoSource,
    TransportError,
    fetch_verdicts,
    filter_top_fraction,
    load_pseudo_labels,
    read_fixture,
    replay_fixture,
    save_pseudo_labels,
    write_fixture,
)
from glpn.pseudolabel.prompts import (
    DETAILED,
    SIMPLE,
    TEMPLATES,
    PromptError,
    PromptStyle,
    PromptTemplate,
    clean_text,
    render_prompt,
)
from glpn.pseudolabel.verdict import (
    ConfidenceOutOfRangeError,
    LlmVerdict,
    MissingConfidenceError,
    MissingResultError,
    ResultOutOfRangeError,
    VerdictParseError,
    parse_verdict,
)

__all__ = [
    "ChatClient",
    "ConfidenceOutOfRangeError",
    "DETAILED",
    "EndpointConfig",
    "FixtureError",
    "LlmVerdict",
    "MissingConfidenceError",
    "MissingResultError",
    "PromptError",
    "PromptStyle",
    "PromptTemplate",
    "PseudoLabelSet",
    "PseudoSource",
    "ResultOutOfRangeError",
    "SIMPLE",
    "TEMPLATES",
    "TransportError",
    "VerdictParseError",
    "clean_text",
    "fetch_verdicts",
    "filter_top_fraction",
    "load_pseudo_labels",
    "parse_verdict",
    "read_fixture",
    "render_prompt",
    "replay_fixture",
    "save_pseudo_labels",
    "write_fixture",
]
