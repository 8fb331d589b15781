"""Model backends for the retrieval pipeline.

A backend answers two requests: ``complete(prompt) -> text`` and
``embed(text) -> vector``.  :class:`HttpBackend` speaks a minimal JSON wire
format to a served model; :class:`HashingEmbedder` is the deterministic
offline stand-in used whenever no backend is configured or a call fails.
"""

from __future__ import annotations

import json
import logging
import os
import re
import urllib.error
import urllib.request
import zlib
from importlib import resources
from typing import Protocol, Sequence

import numpy as np

from cgm.errors import CGMError

log = logging.getLogger(__name__)

BACKEND_URL_ENV = "CGM_BACKEND_URL"
BACKEND_TOKEN_ENV = "CGM_BACKEND_TOKEN"
_SLOT_RE = re.compile(r"\{(\w+)\}")


class BackendError(CGMError):
    pass


class ModelBackend(Protocol):
    def complete(self, prompt: str) -> str: ...

    def embed(self, text: str) -> Sequence[float]: ...


class HashingEmbedder:
    """Hashed character-trigram counts, L2-normalised (zero vector for "")."""

    def __init__(self, dim: int = 256):
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        if not text:
            return vec
        grams = [text[i: i + 3] for i in range(max(1, len(text) - 2))]
        for g in grams:
            vec[zlib.crc32(g.encode("utf-8", errors="surrogatepass")) % self.dim] += 1.0
        return vec / np.linalg.norm(vec)

    def complete(self, prompt: str) -> str:
        raise BackendError("the offline embedder cannot complete prompts")


class HttpBackend:
    """JSON over HTTP: ``POST {url}/complete {"prompt"} -> {"text"}`` and
    ``POST {url}/embed {"text"} -> {"vector"}``.

    Each request is retried once; a second failure raises :class:`BackendError`
    so the caller can fall back to offline behaviour.
    """

    def __init__(self, url: str, token: str | None = None, timeout: float = 30.0, retries: int = 1):
        self.url = url.rstrip("/")
        self.token = token
        self.timeout = timeout
        self.retries = retries

    @classmethod
    def from_env(cls) -> HttpBackend | None:
        url = os.environ.get(BACKEND_URL_ENV)
        return cls(url, os.environ.get(BACKEND_TOKEN_ENV)) if url else None

    def _post(self, route: str, payload: dict) -> dict:
        body = json.dumps(payload).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            req = urllib.request.Request(f"{self.url}/{route}", data=body, headers=headers, method="POST")
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    return json.loads(resp.read().decode("utf-8"))
            except (urllib.error.URLError, OSError, ValueError) as exc:
                last = exc
                log.debug("backend %s attempt %d failed: %s", route, attempt + 1, exc)
        raise BackendError(f"{route} request to {self.url} failed: {last}")

    def complete(self, prompt: str) -> str:
        doc = self._post("complete", {"prompt": prompt})
        text = doc.get("text") if isinstance(doc, dict) else None
        if not isinstance(text, str):
            raise BackendError("completion response lacks a 'text' string")
        return text

    def embed(self, text: str) -> list[float]:
        doc = self._post("embed", {"text": text})
        vec = doc.get("vector") if isinstance(doc, dict) else None
        if not isinstance(vec, list) or not vec:
            raise BackendError("embedding response lacks a 'vector' list")
        return [float(v) for v in vec]


def load_template(name: str) -> str:
    return resources.files("cgm.rag").joinpath("templates", f"{name}.txt").read_text(encoding="utf-8")


def render(template: str, **values: str) -> str:
    """Fill ``{name}`` slots; unknown braces (e.g. in code) are left alone."""
    return _SLOT_RE.sub(lambda m: values.get(m.group(1), m.group(0)), template)
