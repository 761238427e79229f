"""Chat-completions client, sample parsing, perplexity, and a replay cache.

Talks to any OpenAI-compatible endpoint: one request per document with n
choices (default) or n single-choice requests, with per-token logprobs
requested so samples can be ranked by perplexity. Completed samples are
appended to a JSON-lines cache keyed by (doc_id, prompt_hash, sample_index);
a warm cache replays a run without any network traffic.
"""

from __future__ import annotations

import json
import logging
import math
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from .prompting import RenderedPrompt

log = logging.getLogger(__name__)

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class LLMClientError(Exception):
    pass


class AuthenticationError(LLMClientError):
    """The endpoint rejected our credentials; retrying cannot help."""


class RequestError(LLMClientError):
    """The endpoint rejected the request itself (bad model name, bad body)."""


@dataclass(frozen=True)
class RawSample:
    doc_id: str
    prompt_hash: str
    sample_index: int
    text: str
    token_logprobs: tuple[float, ...] | None
    finish_reason: str

    @property
    def failed(self) -> bool:
        return self.finish_reason.startswith("error")


@dataclass(frozen=True)
class ParsedSample:
    phrases: tuple[str, ...]
    perplexity: float | None  # None means unknown (no logprobs available)
    fallback: bool = False


def perplexity(sample: RawSample, mode: str = "mean") -> float | None:
    """exp of the negative log-likelihood of the generated tokens.

    mode "mean" divides by the token count (length-normalized, the default);
    mode "sum" does not. Returns None when no logprobs were captured.
    """
    lps = sample.token_logprobs
    if not lps:
        return None
    nll = -sum(lps)
    if mode == "mean":
        nll /= len(lps)
    elif mode != "sum":
        raise ValueError(f"unknown perplexity mode {mode!r}")
    try:
        return math.exp(nll)
    except OverflowError:
        return math.inf


_STRIP_CHARS = " \t\r\n\"'`[]"


def _list_content(text: str, start: int) -> str:
    """Text between the bracket at `start` and its matching close."""
    depth = 1
    quote = None
    for i in range(start + 1, len(text)):
        ch = text[i]
        if quote:
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth == 0:
                return text[start + 1 : i]
    return text[start + 1 :]


def _split_top_level(content: str) -> list[str]:
    """Split on commas and newlines outside quotes and nested brackets."""
    items: list[str] = []
    buf: list[str] = []
    depth = 0
    quote = None
    for ch in content:
        if quote:
            buf.append(ch)
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
            buf.append(ch)
        elif ch == "[":
            depth += 1
            buf.append(ch)
        elif ch == "]":
            depth = max(0, depth - 1)
            buf.append(ch)
        elif (ch == "," or ch == "\n") and depth == 0:
            items.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    items.append("".join(buf))
    return items


def parse_sample(raw_text: str, had_prefill: bool) -> ParsedSample:
    """Extract the keyphrase list from one completion.

    The completion is expected to be (the rest of) a bracketed list; content
    is taken up to the matching close bracket and split on top-level commas
    and newlines. Without any bracket the whole text is split the same way
    and the sample is flagged as a parse fallback. Never raises.
    """
    full = ("[" if had_prefill else "") + raw_text
    start = full.find("[")
    fallback = start < 0
    content = full if fallback else _list_content(full, start)
    phrases = []
    for item in _split_top_level(content):
        cleaned = item.strip(_STRIP_CHARS)
        if cleaned:
            phrases.append(cleaned)
    if not phrases:
        fallback = True
    return ParsedSample(phrases=tuple(phrases), perplexity=None, fallback=fallback)


class LLMClient:
    """Thin requests-based client for OpenAI-compatible chat completions."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        request_mode: str = "choices",
        ppl_mode: str = "mean",
        max_retries: int = 4,
        backoff_base: float = 0.5,
        timeout: float = 120.0,
    ):
        if request_mode not in ("choices", "per-request"):
            raise ValueError(f"unknown request mode {request_mode!r}")
        e = endpoint.rstrip("/")
        self.url = e if e.endswith("/chat/completions") else e + "/chat/completions"
        self.model = model
        self.api_key = api_key
        self.request_mode = request_mode
        self.ppl_mode = ppl_mode
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.timeout = timeout

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def _post_with_retries(self, payload: dict) -> dict | None:
        """POST one request; returns the JSON body or None when retries ran out."""
        for attempt in range(self.max_retries + 1):
            reason = None
            try:
                resp = requests.post(
                    self.url, json=payload, headers=self._headers(), timeout=self.timeout
                )
            except requests.RequestException as exc:
                reason = f"connection error: {exc}"
            else:
                if resp.status_code == 200:
                    try:
                        return resp.json()
                    except ValueError:
                        reason = "invalid JSON in response body"
                elif resp.status_code in (401, 403):
                    raise AuthenticationError(
                        f"endpoint returned HTTP {resp.status_code}; check KPAGG_API_KEY"
                    )
                elif resp.status_code in _RETRYABLE_STATUS:
                    reason = f"HTTP {resp.status_code}"
                else:
                    raise RequestError(
                        f"endpoint returned HTTP {resp.status_code}: {resp.text[:200]}"
                    )
            if attempt < self.max_retries:
                delay = self.backoff_base * (2**attempt)
                log.warning(
                    "request failed (%s); retry %d/%d in %.1fs",
                    reason, attempt + 1, self.max_retries, delay,
                )
                time.sleep(delay)
            else:
                log.warning("request failed (%s); retries exhausted", reason)
        return None

    def _messages(self, prompt: RenderedPrompt) -> list[dict]:
        messages = [
            {"role": "system", "content": prompt.system},
            {"role": "user", "content": prompt.user},
        ]
        if prompt.assistant_prefill:
            messages.append({"role": "assistant", "content": prompt.assistant_prefill})
        return messages

    def _payload(self, prompt: RenderedPrompt, n: int, temperature: float, max_tokens: int) -> dict:
        return {
            "model": self.model,
            "messages": self._messages(prompt),
            "temperature": temperature,
            "max_tokens": max_tokens,
            "n": n,
            "logprobs": True,
        }

    @staticmethod
    def _sample_from_choice(
        doc_id: str, prompt_hash: str, index: int, choice: dict
    ) -> RawSample:
        message = choice.get("message") or {}
        text = message.get("content") or ""
        token_logprobs = None
        lpinfo = choice.get("logprobs")
        if isinstance(lpinfo, dict) and isinstance(lpinfo.get("content"), list):
            values = [
                t.get("logprob")
                for t in lpinfo["content"]
                if isinstance(t, dict) and isinstance(t.get("logprob"), (int, float))
            ]
            if values:
                token_logprobs = tuple(float(v) for v in values)
        return RawSample(
            doc_id=doc_id,
            prompt_hash=prompt_hash,
            sample_index=index,
            text=text,
            token_logprobs=token_logprobs,
            finish_reason=str(choice.get("finish_reason") or "unknown"),
        )

    def _failure(self, doc_id: str, prompt_hash: str, index: int) -> RawSample:
        return RawSample(
            doc_id=doc_id,
            prompt_hash=prompt_hash,
            sample_index=index,
            text="",
            token_logprobs=None,
            finish_reason="error:request_failed",
        )

    def sample_completions(
        self,
        prompt: RenderedPrompt,
        doc_id: str,
        n: int,
        temperature: float,
        max_tokens: int,
        indices: list[int] | None = None,
    ) -> list[RawSample]:
        """Draw samples for one prompt; `indices` restricts which sample
        slots to fetch (used when resuming from a partly warm cache)."""
        if indices is None:
            indices = list(range(n))
        if not indices:
            return []
        out: list[RawSample] = []
        if self.request_mode == "choices":
            body = self._post_with_retries(
                self._payload(prompt, len(indices), temperature, max_tokens)
            )
            choices = body.get("choices") if isinstance(body, dict) else None
            for pos, index in enumerate(indices):
                if isinstance(choices, list) and pos < len(choices):
                    out.append(
                        self._sample_from_choice(
                            doc_id, prompt.prompt_hash, index, choices[pos]
                        )
                    )
                else:
                    out.append(self._failure(doc_id, prompt.prompt_hash, index))
        else:
            for index in indices:
                body = self._post_with_retries(
                    self._payload(prompt, 1, temperature, max_tokens)
                )
                choices = body.get("choices") if isinstance(body, dict) else None
                if isinstance(choices, list) and choices:
                    out.append(
                        self._sample_from_choice(
                            doc_id, prompt.prompt_hash, index, choices[0]
                        )
                    )
                else:
                    out.append(self._failure(doc_id, prompt.prompt_hash, index))
        return out


class SampleCache:
    """Append-only JSON-lines store of RawSamples, keyed by
    (doc_id, prompt_hash, sample_index). First write for a key wins."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._index: dict[tuple[str, str, int], RawSample] = {}
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            return
        corrupt = 0
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    sample = self._decode(json.loads(line))
                except (ValueError, TypeError, KeyError):
                    corrupt += 1
                    log.warning("%s:%d: skipping corrupt cache line", self.path, lineno)
                    continue
                self._index.setdefault(self._key(sample), sample)
        if corrupt:
            log.warning("%s: skipped %d corrupt cache line(s)", self.path, corrupt)

    @staticmethod
    def _key(sample: RawSample) -> tuple[str, str, int]:
        return (sample.doc_id, sample.prompt_hash, sample.sample_index)

    @staticmethod
    def _decode(obj: dict) -> RawSample:
        lps = obj["token_logprobs"]
        if lps is not None:
            lps = tuple(float(x) for x in lps)
        return RawSample(
            doc_id=str(obj["doc_id"]),
            prompt_hash=str(obj["prompt_hash"]),
            sample_index=int(obj["sample_index"]),
            text=str(obj["text"]),
            token_logprobs=lps,
            finish_reason=str(obj["finish_reason"]),
        )

    @staticmethod
    def _encode(sample: RawSample) -> dict:
        return {
            "doc_id": sample.doc_id,
            "prompt_hash": sample.prompt_hash,
            "sample_index": sample.sample_index,
            "text": sample.text,
            "token_logprobs": (
                list(sample.token_logprobs) if sample.token_logprobs is not None else None
            ),
            "finish_reason": sample.finish_reason,
        }

    def get(self, doc_id: str, prompt_hash: str, sample_index: int) -> RawSample | None:
        return self._index.get((doc_id, prompt_hash, sample_index))

    def put(self, sample: RawSample) -> None:
        with self._lock:
            key = self._key(sample)
            if key in self._index:
                return
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(self._encode(sample), ensure_ascii=False) + "\n")
            self._index[key] = sample

    def __len__(self) -> int:
        return len(self._index)
