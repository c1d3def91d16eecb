"""LLM-as-a-judge partial reward.

A judge client is anything with ``complete(prompt, request) -> str``. The HTTP
client speaks the common chat-completion JSON format; the stubs are hermetic
and deterministic and are what the tests and the CLI use by default.
"""

from __future__ import annotations

import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from typing import Optional, Protocol

import httpx

from .analysis import jaccard, ngram_set, tokenize
from .prompts import JUDGE_TEMPLATE, fill

log = logging.getLogger(__name__)

MAX_RAW_SCORE = 2.0
_NUMBER = re.compile(r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)")


class JudgeParseError(ValueError):
    pass


class JudgeTransportError(RuntimeError):
    """The judge backend could not be reached after all retries."""


@dataclass(frozen=True)
class JudgeRequest:
    question: str
    hint: str
    gold_sql: str
    predicted_sql: str

    def __post_init__(self):
        if not self.gold_sql.strip():
            raise ValueError("gold_sql must be non-empty")


@dataclass(frozen=True)
class JudgeVerdict:
    score: float  # normalized to [0, 1]
    raw: Optional[str]
    parse_failed: bool = False


class JudgeClient(Protocol):
    def complete(self, prompt: str, request: JudgeRequest) -> str: ...


def build_judge_prompt(req: JudgeRequest) -> str:
    return fill(JUDGE_TEMPLATE, {
        "QUESTION": req.question,
        "HINT": req.hint,
        "GOLD_QUERY": req.gold_sql,
        "PREDICTED_QUERY": req.predicted_sql,
    })


def parse_judge_score(raw: str) -> float:
    """First decimal number in the response, clamped to [0, 2]."""
    m = _NUMBER.search(raw or "")
    if m is None:
        raise JudgeParseError(f"no numeric score in judge response: {raw!r}")
    return min(MAX_RAW_SCORE, max(0.0, float(m.group())))


def judge_verdict(req: JudgeRequest, client: JudgeClient, parse_retries: int = 2) -> JudgeVerdict:
    """Prompt, call, parse, normalize. Unparseable replies fall back to 0 with a flag.

    Transport errors propagate; they are not a score of zero.
    """
    prompt = build_judge_prompt(req)
    raw = None
    for _ in range(parse_retries + 1):
        raw = client.complete(prompt, req)
        try:
            return JudgeVerdict(parse_judge_score(raw) / MAX_RAW_SCORE, raw)
        except JudgeParseError:
            log.debug("unparseable judge reply %r", raw)
    log.warning("judge reply unparseable after %d attempts; scoring 0.0", parse_retries + 1)
    return JudgeVerdict(0.0, raw, parse_failed=True)


def judge_score(req: JudgeRequest, client: JudgeClient, parse_retries: int = 2) -> float:
    return judge_verdict(req, client, parse_retries).score


# -- stubs -------------------------------------------------------------

class ConstantJudge:
    """Replies with a fixed string; counts calls."""

    def __init__(self, reply: str = "1.0"):
        self.reply = reply
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, prompt: str, request: JudgeRequest) -> str:
        with self._lock:
            self.calls += 1
        return self.reply


class SimilarityJudge:
    """Scores 2 * bigram Jaccard(predicted, gold); deterministic stand-in for a real judge."""

    def __init__(self, n: int = 2):
        self.n = n
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, prompt: str, request: JudgeRequest) -> str:
        with self._lock:
            self.calls += 1
        sim = jaccard(ngram_set(tokenize(request.predicted_sql), self.n),
                      ngram_set(tokenize(request.gold_sql), self.n))
        return f"{MAX_RAW_SCORE * sim:.6f}"


# -- HTTP transport ----------------------------------------------------

@dataclass
class JudgeClientConfig:
    endpoint: str
    model: str = "judge"
    temperature: float = 0.0
    max_retries: int = 3
    timeout: float = 60.0
    max_in_flight: int = 8
    token_env: str = "JUDGE_API_KEY"
    backoff: float = 0.5

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


class HttpJudgeClient:
    """Chat-completion client: POST {model, messages, temperature} -> choices[0].message.content."""

    def __init__(self, config: JudgeClientConfig, transport: Optional[httpx.BaseTransport] = None):
        self.config = config
        self._sem = threading.BoundedSemaphore(config.max_in_flight)
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(config.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._http = httpx.Client(timeout=config.timeout, headers=headers, transport=transport)

    def close(self) -> None:
        self._http.close()

    def complete(self, prompt: str, request: Optional[JudgeRequest] = None) -> str:
        body = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        }
        last_exc: Optional[Exception] = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(self.config.backoff * 2 ** (attempt - 1))
            try:
                with self._sem:
                    log.debug("judge request to %s: %s (auth redacted)", self.config.endpoint, body)
                    resp = self._http.post(self.config.endpoint, json=body)
                resp.raise_for_status()
                data = resp.json()
                log.debug("judge response: %s", data)
                return data["choices"][0]["message"]["content"]
            except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError) as exc:
                last_exc = exc
                log.debug("judge attempt %d failed: %s", attempt + 1, exc)
        raise JudgeTransportError(
            f"judge endpoint {self.config.endpoint} failed after {self.config.max_retries + 1} attempts"
        ) from last_exc
