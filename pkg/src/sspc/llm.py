"""Zero-shot chat-model baseline over a generic chat-completions endpoint.

One request per problem; the prompt numbers the sentences and asks for a JSON
array with one 0/1 entry per adjacent pair. Raw responses are cached on disk
keyed by (model, template hash, problem id) so repeated runs are free and
byte-identical. Problems whose responses stay unparseable after retries fall
back to all-zero predictions and are tallied in the report.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

from .corpus import Dataset, Problem
from .errors import DataError, SspcError, UsageError
from .evaluation import EvalReport, score_predictions

REQUIRED_PLACEHOLDERS = ("{{n_sentences}}", "{{numbered_sentences}}")


class TransportError(SspcError):
    """A request failed in a retryable way (network, 5xx, timeout)."""


class AuthError(SspcError):
    """The endpoint rejected our credentials; retrying cannot help."""


@dataclass(frozen=True)
class LlmConfig:
    endpoint: str
    model: str
    api_key_env: str = "SSPC_API_KEY_DEFAULT"
    template_path: Optional[str] = None  # None = bundled default template
    max_retries: int = 2
    timeout: float = 30.0
    requests_per_minute: float = 60.0
    # Dotted path to the text inside the response JSON; integers index lists.
    content_path: str = "choices.0.message.content"
    cache_dir: str = "cache"
    temperature: float = 0.0

    def __post_init__(self):
        if self.max_retries < 0:
            raise DataError("max_retries must be >= 0")
        if self.timeout <= 0:
            raise DataError("timeout must be > 0")
        if self.requests_per_minute <= 0:
            raise DataError("requests_per_minute must be > 0")


def default_template() -> str:
    return (
        resources.files("sspc").joinpath("templates/llm_prompt.txt").read_text(encoding="utf-8")
    )


def render_prompt(template: str, problem: Problem) -> str:
    """Fill the template with numbered sentences and the expected answer length."""
    for placeholder in REQUIRED_PLACEHOLDERS:
        if placeholder not in template:
            raise UsageError(f"prompt template is missing the {placeholder} placeholder")
    if problem.n_boundaries == 0:
        raise DataError(f"{problem.id}: nothing to classify (single-sentence problem)")
    numbered = "\n".join(
        f"{i + 1}. {sentence}" for i, sentence in enumerate(problem.sentences)
    )
    return (
        template.replace("{{n_sentences}}", str(problem.n_sentences))
        .replace("{{n_boundaries}}", str(problem.n_boundaries))
        .replace("{{numbered_sentences}}", numbered)
    )


_ARRAY_RE = re.compile(r"\[[^\[\]]*\]")


def parse_llm_response(text: str, expected_len: int) -> tuple[int, ...]:
    """Extract the first JSON integer array from free-form model output."""
    if expected_len < 0:
        raise DataError("expected_len must be >= 0")
    for match in _ARRAY_RE.finditer(text):
        try:
            candidate = json.loads(match.group())
        except json.JSONDecodeError:
            continue
        if not isinstance(candidate, list):
            continue
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in candidate):
            continue
        if any(v not in (0, 1) for v in candidate):
            raise DataError(f"response array contains non-binary values: {candidate[:8]}")
        if len(candidate) != expected_len:
            raise DataError(
                f"response array has {len(candidate)} entries, expected {expected_len}"
            )
        return tuple(candidate)
    raise DataError("no JSON array found in response")


class TokenBucket:
    """Request pacing: ``rate_per_minute`` tokens, refilled continuously."""

    def __init__(
        self,
        rate_per_minute: float,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.capacity = max(1.0, rate_per_minute / 60.0)
        self.rate = rate_per_minute / 60.0  # tokens per second
        self.tokens = self.capacity
        self.clock = clock
        self.sleep = sleep
        self.last = clock()

    def acquire(self) -> None:
        while True:
            now = self.clock()
            self.tokens = min(self.capacity, self.tokens + (now - self.last) * self.rate)
            self.last = now
            if self.tokens >= 1.0:
                self.tokens -= 1.0
                return
            self.sleep((1.0 - self.tokens) / self.rate)


def _default_transport(url: str, headers: dict, payload: dict, timeout: float) -> dict:
    import requests

    response = requests.post(url, json=payload, headers=headers, timeout=timeout)
    if response.status_code in (401, 403):
        raise AuthError(f"endpoint returned {response.status_code}")
    if response.status_code >= 400:
        raise TransportError(f"endpoint returned {response.status_code}")
    return response.json()


def extract_content(payload: dict, content_path: str) -> str:
    node = payload
    for part in content_path.split("."):
        try:
            node = node[int(part)] if part.isdigit() else node[part]
        except (KeyError, IndexError, TypeError) as exc:
            raise DataError(f"response JSON missing {content_path!r} at {part!r}") from exc
    if not isinstance(node, str):
        raise DataError(f"response content at {content_path!r} is not a string")
    return node


@dataclass
class LlmRunStats:
    n_requests: int = 0
    cache_hits: int = 0
    parse_failures: int = 0
    fallback_ids: list[str] = field(default_factory=list)


def run_llm_baseline(
    cfg: LlmConfig,
    dataset: Dataset,
    transport: Optional[Callable[[str, dict, dict, float], dict]] = None,
    clock: Callable[[], float] = time.monotonic,
    sleep: Callable[[float], None] = time.sleep,
) -> tuple[EvalReport, LlmRunStats]:
    """Query the endpoint once per problem, score the answers, report fallbacks."""
    if any(labels is None for _, labels in dataset.items):
        raise DataError("llm baseline needs a labeled dataset for scoring")
    transport = transport or _default_transport
    template = (
        Path(cfg.template_path).read_text(encoding="utf-8")
        if cfg.template_path
        else default_template()
    )
    template_hash = hashlib.sha256(template.encode("utf-8")).hexdigest()[:16]
    cache_root = Path(cfg.cache_dir) / cfg.model.replace("/", "_") / template_hash
    cache_root.mkdir(parents=True, exist_ok=True)

    api_key = os.environ.get(cfg.api_key_env, "")
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"

    bucket = TokenBucket(cfg.requests_per_minute, clock=clock, sleep=sleep)
    stats = LlmRunStats()
    predictions: list[tuple[str, tuple[int, ...]]] = []
    any_success = False
    transport_failures = 0

    for problem, _ in dataset.items:
        expected = problem.n_boundaries
        if expected == 0:
            predictions.append((problem.id, ()))
            continue
        cache_file = cache_root / f"{problem.id}.json"
        labels: Optional[tuple[int, ...]] = None

        cached_texts: list[str] = []
        if cache_file.exists():
            stats.cache_hits += 1
            cached_texts = json.loads(cache_file.read_text(encoding="utf-8"))["responses"]
            for text in cached_texts:
                try:
                    labels = parse_llm_response(text, expected)
                    break
                except DataError:
                    continue

        if labels is None and not cache_file.exists():
            prompt = render_prompt(template, problem)
            payload = {
                "model": cfg.model,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": cfg.temperature,
            }
            responses: list[str] = []
            for _attempt in range(cfg.max_retries + 1):
                bucket.acquire()
                try:
                    stats.n_requests += 1
                    raw = transport(cfg.endpoint, headers, payload, cfg.timeout)
                except AuthError:
                    raise
                except (TransportError, OSError):
                    transport_failures += 1
                    continue
                any_success = True
                try:
                    text = extract_content(raw, cfg.content_path)
                except DataError:
                    text = json.dumps(raw)
                responses.append(text)
                try:
                    labels = parse_llm_response(text, expected)
                    break
                except DataError:
                    continue
            if responses:  # transport-only failures stay retryable on the next run
                cache_file.write_text(json.dumps({"responses": responses}), encoding="utf-8")

        if labels is None:
            stats.parse_failures += 1
            stats.fallback_ids.append(problem.id)
            labels = (0,) * expected  # conservative fallback
        predictions.append((problem.id, labels))

    if stats.n_requests > 0 and not any_success and transport_failures > 0:
        raise TransportError("endpoint unreachable: every request failed")

    report = score_predictions(dataset, predictions, dataset_name=dataset.split_name)
    return report, stats
