"""Parsing of ``Result: R, Confidence: C%`` responses."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class LlmVerdict:
    pred: int
    confidence: float
    reason: Optional[str] = None
    raw: str = ""


class VerdictParseError(ValueError):
    pass


class MissingResultError(VerdictParseError):
    pass


class MissingConfidenceError(VerdictParseError):
    pass


class ResultOutOfRangeError(VerdictParseError):
    pass


class ConfidenceOutOfRangeError(VerdictParseError):
    pass


_NUMBER = r"([+-]?(?:\d+(?:\.\d*)?|\.\d+))"
_RESULT = re.compile(r"result\s*:\s*" + _NUMBER, re.IGNORECASE)
_CONFIDENCE = re.compile(r"confidence\s*:\s*" + _NUMBER + r"\s*%?", re.IGNORECASE)
_REASON = re.compile(r"reason\s*:\s*(.*)", re.IGNORECASE | re.DOTALL)


def parse_verdict(response_text: str) -> LlmVerdict:
    m_res = _RESULT.search(response_text)
    if m_res is None:
        raise MissingResultError("no 'Result:' value found")
    m_conf = _CONFIDENCE.search(response_text)
    if m_conf is None:
        raise MissingConfidenceError("no 'Confidence:' value found")

    res = float(m_res.group(1))
    if res not in (0.0, 1.0):
        raise ResultOutOfRangeError(f"result {m_res.group(1)!r} is not 0 or 1")
    pct = float(m_conf.group(1))
    if not 0.0 <= pct <= 100.0:
        raise ConfidenceOutOfRangeError(f"confidence {m_conf.group(1)!r} is outside [0, 100]")

    reason = None
    m_reason = _REASON.search(response_text)
    if m_reason is not None:
        reason = m_reason.group(1).strip() or None
    return LlmVerdict(pred=int(res), confidence=pct / 100.0, reason=reason, raw=response_text)
