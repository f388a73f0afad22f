"""The gateway: bounded in-flight queries, retries with backoff, and accounting."""

from __future__ import annotations

import logging
import threading
import time
from typing import Callable, Optional

from ..errors import BackendUnreachable, OutputTruncated
from .backends import ModelResponse, TransportError
from .ledger import RunLedger
from .prompts import PromptRequest

logger = logging.getLogger(__name__)


class Gateway:
    def __init__(
        self,
        backend,
        ledger: Optional[RunLedger] = None,
        *,
        retries: int = 3,
        backoff: float = 0.5,
        max_in_flight: int = 4,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.backend = backend
        self.ledger = ledger if ledger is not None else RunLedger()
        self.retries = retries
        self.backoff = backoff
        self._slots = threading.BoundedSemaphore(max(1, max_in_flight))
        self._sleep = sleep
        self.failures = 0

    def query(self, request: PromptRequest, source: Optional[str] = None) -> ModelResponse:
        """Send one prompt; every answered prompt is accounted exactly once.

        Transport failures are retried ``retries`` times with exponential
        backoff before :class:`BackendUnreachable` is raised.
        """
        last = None
        for attempt in range(self.retries + 1):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            try:
                with self._slots:
                    response = self.backend.complete(request)
                break
            except BackendUnreachable:
                self.failures += 1
                raise
            except TransportError as exc:
                last = exc
                logger.warning("backend transport failure (attempt %d/%d): %s", attempt + 1, self.retries + 1, exc)
        else:
            self.failures += 1
            raise BackendUnreachable(f"backend unreachable after {self.retries + 1} attempts: {last}")
        self.ledger.record(response, request.template.value, source)
        if response.truncated:
            raise OutputTruncated(
                f"answer hit the {request.decoding.max_output_tokens}-token limit (fingerprint {response.fingerprint})"
            )
        return response
