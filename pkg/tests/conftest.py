import pytest

from lingobank.hub import HubConfig, SignalingHub
from lingobank.lessons import LessonLibrary
from lingobank.store import EventStore


class ManualClock:
    def __init__(self, start: float = 1_000_000.0):
        self.now = start

    def __call__(self) -> float:
        return self.now

    def advance(self, seconds: float) -> float:
        self.now += seconds
        return self.now


@pytest.fixture
def clock():
    return ManualClock()


def plain_tokens(user_id: str) -> str:
    return f"tok-{user_id}"


@pytest.fixture
def hub(clock):
    return SignalingHub(store=EventStore(), clock=clock,
                        lessons=LessonLibrary.bundled(),
                        token_factory=plain_tokens)


def make_hub(clock, **config_kwargs):
    return SignalingHub(store=EventStore(), clock=clock,
                        config=HubConfig(**config_kwargs),
                        lessons=LessonLibrary.bundled(),
                        token_factory=plain_tokens)
