"""Chat-completion client with structured verdicts and record/replay.

Requests go to an OpenAI-compatible endpoint as JSON chat completions;
images travel inline as base64 data URLs so a recorded exchange is fully
self-contained. Every request is fingerprinted over its canonical payload
(model id, temperature, all message content including image bytes), and
the fingerprint keys a one-file-per-entry cache:

* Live    - straight HTTP round-trip, bounded retries on transient errors
* Record  - live call, then the response is written to the cache
* Replay  - cache read only; a missing fingerprint is an error

Replay mode performs zero network operations, which makes whole
evaluation runs reproducible offline.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable

import httpx

from .errors import (
    CacheMissError,
    MalformedOutputError,
    ProviderError,
    TransportError,
)
from .template import ComposedPrompt

RETRY_ATTEMPTS = 3
RETRY_BACKOFF_S = 0.5

VERDICT_REMINDER = (
    "Your previous response could not be parsed. "
    'Respond only with a JSON object like this: '
    '{"Classification": <0 or 1>, "Reasoning": <explanation>}'
)


class Mode(Enum):
    LIVE = "live"
    RECORD = "record"
    REPLAY = "replay"


@dataclass(frozen=True)
class ModelConfig:
    endpoint_url: str = "https://api.openai.com/v1/chat/completions"
    model_id: str = "gpt-4.1"
    temperature: float = 0.0
    max_output_tokens: int = 512
    max_in_flight: int = 4
    mode: Mode = Mode.LIVE
    cache_dir: str | None = None
    api_key_env: str = "FM_API_KEY"

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.mode in (Mode.RECORD, Mode.REPLAY) and not self.cache_dir:
            raise ValueError(f"{self.mode.value} mode needs a cache_dir")


class Role(Enum):
    SYSTEM = "system"
    USER = "user"


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    media_type: str
    data_b64: str


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    parts: tuple[TextPart | ImagePart, ...]


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[ChatMessage, ...]
    model_id: str
    temperature: float

    def __post_init__(self) -> None:
        system_positions = [i for i, m in enumerate(self.messages) if m.role is Role.SYSTEM]
        if len(system_positions) > 1 or (system_positions and system_positions[0] != 0):
            raise ValueError("at most one system message, and it must come first")


@dataclass(frozen=True)
class Verdict:
    classification: int
    reasoning: str

    def __post_init__(self) -> None:
        if self.classification not in (0, 1):
            raise ValueError("classification must be 0 or 1")


@dataclass(frozen=True)
class ParseFailure:
    raw_text: str


@dataclass(frozen=True)
class Usage:
    input_tokens: int = 0
    output_tokens: int = 0

    def __add__(self, other: "Usage") -> "Usage":
        return Usage(
            self.input_tokens + other.input_tokens,
            self.output_tokens + other.output_tokens,
        )


@dataclass(frozen=True)
class DetectionRecord:
    sample_id: str
    verdict: Verdict | ParseFailure
    usage: Usage
    latency_ms: float
    cache_hit: bool
    retried: bool = False

    @property
    def parsed(self) -> bool:
        return isinstance(self.verdict, Verdict)

    def to_dict(self) -> dict:
        if isinstance(self.verdict, Verdict):
            verdict = {
                "classification": self.verdict.classification,
                "reasoning": self.verdict.reasoning,
            }
        else:
            verdict = {"parse_failure": self.verdict.raw_text}
        return {
            "sample_id": self.sample_id,
            "verdict": verdict,
            "usage": {
                "input_tokens": self.usage.input_tokens,
                "output_tokens": self.usage.output_tokens,
            },
            "latency_ms": self.latency_ms,
            "cache_hit": self.cache_hit,
            "retried": self.retried,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DetectionRecord":
        v = d["verdict"]
        verdict: Verdict | ParseFailure
        if "parse_failure" in v:
            verdict = ParseFailure(raw_text=v["parse_failure"])
        else:
            verdict = Verdict(classification=int(v["classification"]), reasoning=v["reasoning"])
        return cls(
            sample_id=d["sample_id"],
            verdict=verdict,
            usage=Usage(int(d["usage"]["input_tokens"]), int(d["usage"]["output_tokens"])),
            latency_ms=float(d["latency_ms"]),
            cache_hit=bool(d["cache_hit"]),
            retried=bool(d.get("retried", False)),
        )


# --- verdict parsing ---------------------------------------------------------


def _first_json_object(text: str) -> dict | None:
    decoder = json.JSONDecoder()
    start = text.find("{")
    while start != -1:
        try:
            obj, _ = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            start = text.find("{", start + 1)
            continue
        if isinstance(obj, dict):
            return obj
        start = text.find("{", start + 1)
    return None


def parse_verdict(raw_text: str) -> Verdict:
    """First JSON object in the text, validated against the verdict schema.

    Code fences are stripped before scanning. Classification is accepted
    as the integer 0/1 or the strings "0"/"1"; anything else is malformed.
    """
    obj = _first_json_object(raw_text)
    if obj is None:
        cleaned = raw_text.replace("```json", "\n").replace("```", "\n")
        obj = _first_json_object(cleaned)
    if obj is None:
        raise MalformedOutputError("no JSON object found in model output")
    if "Classification" not in obj or "Reasoning" not in obj:
        raise MalformedOutputError("verdict object is missing Classification or Reasoning")
    raw_cls = obj["Classification"]
    if isinstance(raw_cls, str) and raw_cls in ("0", "1"):
        classification = int(raw_cls)
    elif type(raw_cls) is int and raw_cls in (0, 1):
        classification = raw_cls
    else:
        raise MalformedOutputError(f"Classification must be 0 or 1, got {raw_cls!r}")
    reasoning = obj["Reasoning"]
    if not isinstance(reasoning, str):
        raise MalformedOutputError("Reasoning must be a string")
    return Verdict(classification=classification, reasoning=reasoning)


def render_verdict(verdict: Verdict) -> str:
    return json.dumps(
        {"Classification": verdict.classification, "Reasoning": verdict.reasoning}
    )


# --- request assembly and fingerprinting --------------------------------------


def build_request(prompt: ComposedPrompt, config: ModelConfig) -> ChatRequest:
    """System text becomes the system message; user parts one user message.

    Image references are resolved to base64 bytes here, so the fingerprint
    covers the actual pixels sent.
    """
    user_parts: list[TextPart | ImagePart] = []
    for part in prompt.user_parts:
        if part.kind == "text":
            user_parts.append(TextPart(text=part.text))
        else:
            data = Path(part.image.path).read_bytes()
            user_parts.append(
                ImagePart(
                    media_type=part.image.media_type,
                    data_b64=base64.b64encode(data).decode("ascii"),
                )
            )
    messages = []
    if prompt.system_text:
        messages.append(ChatMessage(role=Role.SYSTEM, parts=(TextPart(prompt.system_text),)))
    messages.append(ChatMessage(role=Role.USER, parts=tuple(user_parts)))
    return ChatRequest(
        messages=tuple(messages),
        model_id=config.model_id,
        temperature=config.temperature,
    )


def _canonical_payload(request: ChatRequest) -> dict:
    return {
        "model_id": request.model_id,
        "temperature": request.temperature,
        "messages": [
            {
                "role": m.role.value,
                "parts": [
                    {"text": p.text}
                    if isinstance(p, TextPart)
                    else {"media_type": p.media_type, "data_b64": p.data_b64}
                    for p in m.parts
                ],
            }
            for m in request.messages
        ],
    }


def fingerprint(request: ChatRequest, config: ModelConfig) -> str:
    """Stable digest over model id, temperature, and full message content."""
    blob = json.dumps(_canonical_payload(request), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def to_wire(request: ChatRequest, config: ModelConfig) -> dict:
    """OpenAI-style chat-completions body."""
    messages = []
    for m in request.messages:
        if m.role is Role.SYSTEM:
            messages.append(
                {"role": "system", "content": "".join(p.text for p in m.parts)}
            )
            continue
        content = []
        for p in m.parts:
            if isinstance(p, TextPart):
                content.append({"type": "text", "text": p.text})
            else:
                content.append(
                    {
                        "type": "image_url",
                        "image_url": {"url": f"data:{p.media_type};base64,{p.data_b64}"},
                    }
                )
        messages.append({"role": "user", "content": content})
    return {
        "model": request.model_id,
        "temperature": request.temperature,
        "max_tokens": config.max_output_tokens,
        "messages": messages,
    }


# --- cache ---------------------------------------------------------------------


class ResponseCache:
    """One JSON file per request fingerprint: raw response text plus usage."""

    def __init__(self, root: Path | str) -> None:
        self.root = Path(root)

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def get(self, key: str) -> tuple[str, Usage] | None:
        path = self._path(key)
        if not path.exists():
            return None
        entry = json.loads(path.read_text(encoding="utf-8"))
        usage = entry.get("usage", {})
        return entry["raw_text"], Usage(
            int(usage.get("input_tokens", 0)), int(usage.get("output_tokens", 0))
        )

    def put(self, key: str, raw_text: str, usage: Usage) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        entry = {
            "raw_text": raw_text,
            "usage": {
                "input_tokens": usage.input_tokens,
                "output_tokens": usage.output_tokens,
            },
        }
        # per-writer temp name: concurrent identical requests race benignly
        # (last atomic rename wins with identical content)
        tmp = self.root / f".{key}.{os.getpid()}.{threading.get_ident()}.tmp"
        tmp.write_text(json.dumps(entry, sort_keys=True, indent=1), encoding="utf-8")
        os.replace(tmp, self._path(key))


# --- client --------------------------------------------------------------------

Transport = Callable[[dict], tuple[str, Usage]]


@dataclass(frozen=True)
class SendResult:
    raw_text: str
    usage: Usage
    cache_hit: bool


class FMClient:
    """Detector-facing client; shareable across evaluation workers.

    ``transport`` can be swapped for a scripted stub in tests; the default
    posts to the configured HTTP endpoint.
    """

    def __init__(self, config: ModelConfig, transport: Transport | None = None) -> None:
        self.config = config
        self._transport = transport or self._http_transport
        self._cache = ResponseCache(config.cache_dir) if config.cache_dir else None
        # admission limiter: at most max_in_flight transport calls outstanding,
        # no matter how many threads share this client
        self._limiter = threading.BoundedSemaphore(config.max_in_flight)

    @property
    def max_in_flight(self) -> int:
        return self.config.max_in_flight

    def _http_transport(self, wire_body: dict) -> tuple[str, Usage]:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.config.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        last_error: Exception | None = None
        for attempt in range(RETRY_ATTEMPTS):
            try:
                response = httpx.post(
                    self.config.endpoint_url, json=wire_body, headers=headers, timeout=120.0
                )
            except httpx.HTTPError as exc:
                last_error = exc
                time.sleep(RETRY_BACKOFF_S * (2**attempt))
                continue
            if response.status_code == 429 or response.status_code >= 500:
                last_error = ProviderError(f"HTTP {response.status_code}: {response.text[:500]}")
                time.sleep(RETRY_BACKOFF_S * (2**attempt))
                continue
            if response.status_code != 200:
                raise ProviderError(f"HTTP {response.status_code}: {response.text[:500]}")
            body = response.json()
            raw_text = body["choices"][0]["message"]["content"]
            usage = body.get("usage", {})
            return raw_text, Usage(
                int(usage.get("prompt_tokens", usage.get("input_tokens", 0))),
                int(usage.get("completion_tokens", usage.get("output_tokens", 0))),
            )
        if isinstance(last_error, ProviderError):
            raise last_error
        raise TransportError(f"request failed after {RETRY_ATTEMPTS} attempts: {last_error}")

    def send(self, request: ChatRequest) -> SendResult:
        key = fingerprint(request, self.config)
        if self.config.mode is Mode.REPLAY:
            cached = self._cache.get(key)
            if cached is None:
                raise CacheMissError(f"no cached response for fingerprint {key}")
            return SendResult(raw_text=cached[0], usage=cached[1], cache_hit=True)
        if self.config.mode is Mode.RECORD:
            cached = self._cache.get(key)
            if cached is not None:
                return SendResult(raw_text=cached[0], usage=cached[1], cache_hit=True)
        with self._limiter:
            raw_text, usage = self._transport(to_wire(request, self.config))
        if self.config.mode is Mode.RECORD:
            self._cache.put(key, raw_text, usage)
        return SendResult(raw_text=raw_text, usage=usage, cache_hit=False)

    def classify(self, prompt: ComposedPrompt, sample_id: str) -> DetectionRecord:
        """One verdict per sample, with a single corrective retry.

        A malformed response triggers exactly one follow-up request that
        appends a reminder of the output schema; if that also fails to
        parse, the record carries a ParseFailure instead of a fabricated
        class.
        """
        request = build_request(prompt, self.config)
        started = time.perf_counter()
        try:
            first = self.send(request)
        except CacheMissError as exc:
            raise CacheMissError(f"sample {sample_id}: {exc}") from None
        try:
            verdict: Verdict | ParseFailure = parse_verdict(first.raw_text)
            retried = False
            usage = first.usage
            cache_hit = first.cache_hit
        except MalformedOutputError:
            retry_request = ChatRequest(
                messages=request.messages
                + (ChatMessage(role=Role.USER, parts=(TextPart(VERDICT_REMINDER),)),),
                model_id=request.model_id,
                temperature=request.temperature,
            )
            try:
                second = self.send(retry_request)
            except CacheMissError as exc:
                raise CacheMissError(f"sample {sample_id} (corrective retry): {exc}") from None
            retried = True
            usage = first.usage + second.usage
            cache_hit = first.cache_hit and second.cache_hit
            try:
                verdict = parse_verdict(second.raw_text)
            except MalformedOutputError:
                verdict = ParseFailure(raw_text=second.raw_text)
        latency_ms = 0.0 if cache_hit else (time.perf_counter() - started) * 1000.0
        return DetectionRecord(
            sample_id=sample_id,
            verdict=verdict,
            usage=usage,
            latency_ms=latency_ms,
            cache_hit=cache_hit,
            retried=retried,
        )
