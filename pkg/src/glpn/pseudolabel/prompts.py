"""Chat prompt templates for LLM pseudo-labeling and request rendering."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from glpn.dataset import NewsRecord


class PromptStyle(str, enum.Enum):
    DETAILED = "detailed"
    SIMPLE = "simple"


@dataclass(frozen=True)
class PromptTemplate:
    style: PromptStyle
    system_text: str
    few_shot_turns: tuple[tuple[str, str], ...]


DETAILED_SYSTEM = (
    "You are a professional misinformation evaluation expert with extensive experience in "
    "detecting and evaluating fake news. Your primary task is to assess the authenticity of "
    "the provided news content.\n"
    "\n"
    "You must adhere to the following strict evaluation guidelines:\n"
    "- If the news is clearly true, label it as 1 (true).\n"
    "- If the news contains ambiguity, unverifiable information, or suspicious claims, you must "
    "classify it as 0 (false).\n"
    "- Alongside your classification, provide a confidence score (between 0% and 100%) that "
    "reflects your certainty in the decision.\n"
    "- Your confidence score should be lower (e.g., 50%-70%) when the news includes unclear or "
    "mixed signals, and higher (e.g., 80%-100%) when you are certain.\n"
    "\n"
    "Output format: Result: R, Confidence: C%, where R is 1 (true) or 0 (false), and C is the "
    "confidence score. Be precise, concise, avoid unnecessary explanations, and give me the reason."
)

DETAILED_TURNS = (
    (
        "user",
        "BREAKING: SkyBusiness reports another five hostages seen escaping #sydneysiege.\n"
        "Additional context: The event is unfolding in Sydney's central business district. "
        "Initial unverified reports mention hostages being rescued, but official statements "
        "have not yet been released.",
    ),
    (
        "assistant",
        "Result: 1, Confidence: 85%\n"
        "Reason: Based on credible news reports and consistent information across major media "
        "outlets, the claim of hostages escaping appears highly plausible. Minor uncertainty "
        "remains due to the absence of official verification.",
    ),
    ("user", "CONFIRMED: NASA discovers alien life on Mars."),
    (
        "assistant",
        "Result: 0, Confidence: 30%\n"
        "Reason: This claim lacks supporting evidence from verified scientific sources, and NASA "
        "has not released any official confirmation regarding such a discovery. The headline "
        "seems sensationalized or misleading.",
    ),
    ("user", "ALERT: Severe storms expected to hit California tomorrow, warns National Weather Service."),
    (
        "assistant",
        "Result: 1, Confidence: 95%\n"
        "Reason: The information originates from the National Weather Service, a highly reliable "
        "and authoritative source. Severe weather forecasts for tomorrow are consistent across "
        "official meteorological channels.",
    ),
)

SIMPLE_SYSTEM = (
    "You are tasked with determining whether the provided news content is true or false.\n"
    "Output format: Result: R, Confidence :c, where R is 1 (true) or 0 (false)."
)

SIMPLE_TURNS = (
    ("user", "BREAKING: SkyBusiness reports another five hostages seen escaping #sydneysiege."),
    ("assistant", "Result: 1, Confidence: 49%"),
    ("user", "CONFIRMED: NASA discovers alien life on Mars."),
    ("assistant", "Result: 0, Confidence: 20%"),
    ("user", "ALERT: Severe storms expected to hit California tomorrow."),
    ("assistant", "Result: 1, Confidence: 63%"),
)

DETAILED = PromptTemplate(PromptStyle.DETAILED, DETAILED_SYSTEM, DETAILED_TURNS)
SIMPLE = PromptTemplate(PromptStyle.SIMPLE, SIMPLE_SYSTEM, SIMPLE_TURNS)

TEMPLATES = {PromptStyle.DETAILED: DETAILED, PromptStyle.SIMPLE: SIMPLE}

_CONTROL = re.compile(r"[\x00-\x08\x0b\x0c\x0e-\x1f\x7f]")
_WS = re.compile(r"\s+")


class PromptError(ValueError):
    pass


def clean_text(text: str) -> str:
    """Drop control characters and collapse whitespace runs to single spaces."""
    return _WS.sub(" ", _CONTROL.sub("", text)).strip()


def render_prompt(tpl: PromptTemplate, record: NewsRecord) -> list[dict[str, str]]:
    if record.text is None:
        raise PromptError(f"record {record.id!r} has no text to label")
    cleaned = clean_text(record.text)
    if not cleaned:
        raise PromptError(f"record {record.id!r} has empty text after cleaning")
    messages = [{"role": "system", "content": tpl.system_text}]
    messages.extend({"role": role, "content": content} for role, content in tpl.few_shot_turns)
    messages.append({"role": "user", "content": cleaned})
    return messages
