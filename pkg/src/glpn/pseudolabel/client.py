"""Obtaining verdicts from a chat-completion endpoint or recorded fixtures, and filtering them."""

from __future__ import annotations

import enum
import json
import logging
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional

import httpx

from glpn.dataset import Dataset
from glpn.pseudolabel.prompts import DETAILED, PromptTemplate, render_prompt
from glpn.pseudolabel.verdict import LlmVerdict, VerdictParseError, parse_verdict

log = logging.getLogger(__name__)

API_KEY_ENV = "LLM_API_KEY"
RETRYABLE_STATUS = frozenset({408, 409, 429, 500, 502, 503, 504})


class PseudoSource(str, enum.Enum):
    LIVE = "live"
    FIXTURE = "fixture"
    ORACLE = "oracle"


@dataclass(frozen=True)
class PseudoLabelSet:
    verdicts: Mapping[str, LlmVerdict]
    source: PseudoSource

    def __len__(self) -> int:
        return len(self.verdicts)

    def ids(self) -> set[str]:
        return set(self.verdicts)


class TransportError(RuntimeError):
    """The endpoint could not be reached or kept failing after all retries."""


class FixtureError(ValueError):
    pass


@dataclass
class EndpointConfig:
    url: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4o"
    api_key: Optional[str] = None
    temperature: float = 0.0
    timeout: float = 60.0
    max_retries: int = 5
    backoff_base: float = 1.0
    backoff_max: float = 30.0
    parse_retries: int = 2
    concurrency: int = 4
    headers: dict[str, str] = field(default_factory=dict)

    def resolved_key(self) -> Optional[str]:
        return self.api_key if self.api_key is not None else os.environ.get(API_KEY_ENV)


class ChatClient:
    """Minimal synchronous chat-completion client with retry and exponential backoff."""

    def __init__(
        self,
        config: EndpointConfig,
        http_client: Optional[httpx.Client] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self._http = http_client or httpx.Client(timeout=config.timeout)
        self._owned = http_client is None
        self._sleep = sleep
        self._lock = threading.Lock()
        self.request_count = 0

    def close(self) -> None:
        if self._owned:
            self._http.close()

    def __enter__(self) -> "ChatClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _delay(self, attempt: int, response: Optional[httpx.Response]) -> float:
        if response is not None:
            retry_after = response.headers.get("Retry-After")
            if retry_after is not None:
                try:
                    return min(float(retry_after), self.config.backoff_max)
                except ValueError:
                    pass
        return min(self.config.backoff_base * 2**attempt, self.config.backoff_max)

    def complete(self, messages: list[dict[str, str]]) -> str:
        cfg = self.config
        headers = {"Content-Type": "application/json", **cfg.headers}
        key = cfg.resolved_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        payload = {"model": cfg.model, "messages": messages, "temperature": cfg.temperature}

        last_error = "no attempt made"
        for attempt in range(cfg.max_retries + 1):
            response = None
            with self._lock:
                self.request_count += 1
            try:
                response = self._http.post(cfg.url, json=payload, headers=headers)
            except httpx.HTTPError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
            else:
                if response.status_code == 200:
                    try:
                        return response.json()["choices"][0]["message"]["content"]
                    except (ValueError, KeyError, IndexError, TypeError) as exc:
                        raise TransportError(f"malformed completion payload: {exc!r}") from None
                last_error = f"HTTP {response.status_code}"
                if response.status_code not in RETRYABLE_STATUS:
                    raise TransportError(f"endpoint returned {last_error}")
            if attempt < cfg.max_retries:
                delay = self._delay(attempt, response)
                log.warning("request failed (%s); retrying in %.2fs", last_error, delay)
                self._sleep(delay)
        raise TransportError(f"giving up after {cfg.max_retries + 1} attempts: {last_error}")


def read_fixture(path: str | Path) -> dict[str, str]:
    raws: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                rid, raw = obj["id"], obj["raw"]
            except (ValueError, KeyError, TypeError) as exc:
                raise FixtureError(f"{path}:{lineno}: malformed fixture line ({exc})") from None
            if not isinstance(rid, str) or not isinstance(raw, str):
                raise FixtureError(f"{path}:{lineno}: 'id' and 'raw' must be strings")
            if rid in raws:
                raise FixtureError(f"{path}:{lineno}: duplicate id {rid!r}")
            raws[rid] = raw
    return raws


def write_fixture(raws: Mapping[str, str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rid in sorted(raws):
            fh.write(json.dumps({"id": rid, "raw": raws[rid]}, ensure_ascii=False) + "\n")


def _parse_all(raws: Mapping[str, str]) -> dict[str, LlmVerdict]:
    out = {}
    for rid in sorted(raws):
        try:
            out[rid] = parse_verdict(raws[rid])
        except VerdictParseError as exc:
            log.info("dropping unparseable verdict for %r: %s", rid, exc)
    return out


def replay_fixture(path: str | Path, ds: Optional[Dataset] = None) -> PseudoLabelSet:
    raws = read_fixture(path)
    if ds is not None:
        test_ids = {r.id for r in ds.records if r.split == "test"}
        unknown = sorted(set(raws) - test_ids)
        if unknown:
            raise FixtureError(f"fixture ids are not test records: {unknown[:5]}")
    return PseudoLabelSet(_parse_all(raws), PseudoSource.FIXTURE)


def fetch_verdicts(
    ds: Dataset,
    tpl: PromptTemplate = DETAILED,
    endpoint: Optional[EndpointConfig] = None,
    *,
    fixture: Optional[str | Path] = None,
    client: Optional[ChatClient] = None,
) -> PseudoLabelSet:
    """Label every test record.

    With ``fixture`` pointing at an existing file and no endpoint, responses are
    replayed without network use. Otherwise each test record is sent to the
    endpoint; responses that fail to parse are re-requested up to
    ``parse_retries`` times and then left out. When ``fixture`` is given in live
    mode, all final raw responses are written there.
    """
    if endpoint is None and client is None:
        if fixture is None:
            raise ValueError("either an endpoint or a fixture file is required")
        return replay_fixture(fixture, ds)

    test_records = [r for r in ds.records if r.split == "test"]
    requests = {r.id: render_prompt(tpl, r) for r in test_records}
    own_client = client is None
    chat = client or ChatClient(endpoint)  # type: ignore[arg-type]
    cfg = chat.config

    def label_one(rid: str) -> tuple[str, str, Optional[LlmVerdict]]:
        raw = ""
        for _ in range(cfg.parse_retries + 1):
            raw = chat.complete(requests[rid])
            try:
                return rid, raw, parse_verdict(raw)
            except VerdictParseError as exc:
                log.info("unparseable response for %r: %s", rid, exc)
        return rid, raw, None

    try:
        with ThreadPoolExecutor(max_workers=max(1, cfg.concurrency)) as pool:
            results = list(pool.map(label_one, sorted(requests)))
    finally:
        if own_client:
            chat.close()

    raws = {rid: raw for rid, raw, _ in results}
    if fixture is not None:
        write_fixture(raws, fixture)
    verdicts = {rid: v for rid, _, v in results if v is not None}
    return PseudoLabelSet(verdicts, PseudoSource.LIVE)


def filter_top_fraction(ps: PseudoLabelSet, fraction: float, n_test: Optional[int] = None) -> PseudoLabelSet:
    """Keep the ``floor(fraction * n_test)`` most confident verdicts.

    ``n_test`` defaults to the size of ``ps``; pass the test-set size when some
    test records have no verdict. Ties are broken by ascending id.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    pool = len(ps) if n_test is None else n_test
    # tolerate 0.07 * 100 == 7.000000000000001 style rounding before flooring
    k = min(len(ps), math.floor(fraction * pool + 1e-9))
    ranked = sorted(ps.verdicts.items(), key=lambda kv: (-kv[1].confidence, kv[0]))
    return PseudoLabelSet(dict(ranked[:k]), ps.source)


def save_pseudo_labels(ps: PseudoLabelSet, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rid in sorted(ps.verdicts):
            v = ps.verdicts[rid]
            row = {"id": rid, "pred": v.pred, "confidence": v.confidence, "reason": v.reason}
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def load_pseudo_labels(path: str | Path, source: PseudoSource = PseudoSource.FIXTURE) -> PseudoLabelSet:
    verdicts = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                v = LlmVerdict(
                    pred=obj["pred"], confidence=float(obj["confidence"]), reason=obj.get("reason")
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise FixtureError(f"{path}:{lineno}: malformed pseudo-label line ({exc})") from None
            if v.pred not in (0, 1) or not 0.0 <= v.confidence <= 1.0:
                raise FixtureError(f"{path}:{lineno}: pred must be 0/1 and confidence in [0, 1]")
            verdicts[obj["id"]] = v
    return PseudoLabelSet(verdicts, source)
