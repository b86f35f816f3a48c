"""In-process publish/subscribe bus.

Handlers run synchronously in subscription order, so delivery per topic
follows publication order and a run is deterministic.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Any, Callable

TOPICS = ("measurements", "diagnoses", "prognoses", "plans")


class TopicBus:
    def __init__(self, topics=TOPICS, keep_log: bool = True):
        self.topics = tuple(topics)
        self._subs: dict[str, list[Callable[[Any], None]]] = defaultdict(list)
        self.keep_log = keep_log
        self.log: list[tuple[str, Any]] = []

    def subscribe(self, topic: str, handler: Callable[[Any], None]) -> None:
        if topic not in self.topics:
            raise KeyError(f"unknown topic {topic!r}")
        self._subs[topic].append(handler)

    def publish(self, topic: str, message: Any) -> None:
        if topic not in self.topics:
            raise KeyError(f"unknown topic {topic!r}")
        if self.keep_log:
            self.log.append((topic, message))
        for h in list(self._subs[topic]):
            h(message)

    def messages(self, topic: str) -> list:
        return [m for t, m in self.log if t == topic]
