"""Lesson materials: ordered cards with per-role prompts.

One lesson per JSON file: {lesson_id, language, level, cards:[{index,
content, student_prompt:{lang: text}, teacher_prompt:{lang: text}}]}.
The loader rejects sparse/misordered card indices and empty prompt maps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import BadLesson


@dataclass(frozen=True)
class LessonCard:
    index: int
    content: str
    student_prompt: dict[str, str]
    teacher_prompt: dict[str, str]

    def to_payload(self) -> dict:
        return {
            "index": self.index,
            "content": self.content,
            "student_prompt": self.student_prompt,
            "teacher_prompt": self.teacher_prompt,
        }


@dataclass(frozen=True)
class Lesson:
    lesson_id: str
    language: str
    level: str
    cards: tuple[LessonCard, ...]

    def __len__(self) -> int:
        return len(self.cards)


def parse_lesson(data: dict) -> Lesson:
    try:
        lesson_id = data["lesson_id"]
        language = data["language"]
        level = data["level"]
        raw_cards = data["cards"]
    except KeyError as exc:
        raise BadLesson(f"missing field {exc.args[0]!r}") from None
    if not isinstance(raw_cards, list) or not raw_cards:
        raise BadLesson("cards must be a non-empty list")
    cards = []
    for position, raw in enumerate(raw_cards):
        try:
            card = LessonCard(
                index=raw["index"],
                content=raw["content"],
                student_prompt=dict(raw["student_prompt"]),
                teacher_prompt=dict(raw["teacher_prompt"]),
            )
        except (KeyError, TypeError) as exc:
            raise BadLesson(f"card {position}: {exc}") from None
        if card.index != position:
            raise BadLesson(f"card indices must be dense, got {card.index} at {position}")
        if not card.student_prompt or not card.teacher_prompt:
            raise BadLesson(f"card {position}: prompts must not be empty")
        cards.append(card)
    return Lesson(lesson_id, language, level, tuple(cards))


def load_lesson(path: str | Path) -> Lesson:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise BadLesson(f"{path}: {exc}") from exc
    return parse_lesson(data)


_FALLBACK_LINES = [
    "Hello! What is your name?",
    "Where are you from?",
    "Please repeat: one, two, three.",
    "What do you do every day?",
    "Thank you for the lesson. Goodbye!",
]


def fallback_lesson(language: str, level: str) -> Lesson:
    """Deterministic stand-in so any (language, level) pair has material."""
    cards = tuple(
        LessonCard(
            index=i,
            content=f"[{language}] {line}",
            student_prompt={"en": f"Say it in {language}: {line}"},
            teacher_prompt={"en": f"Have the student repeat: {line}"},
        )
        for i, line in enumerate(_FALLBACK_LINES)
    )
    return Lesson(f"fallback-{language}-{level}", language, level, cards)


class LessonLibrary:
    def __init__(self, lessons: list[Lesson] | None = None):
        self._by_key: dict[tuple[str, str], Lesson] = {}
        for lesson in lessons or []:
            self.add(lesson)

    def add(self, lesson: Lesson) -> None:
        self._by_key[(lesson.language, lesson.level)] = lesson

    def get(self, language: str, level: str) -> Lesson:
        lesson = self._by_key.get((language, level))
        if lesson is None:
            lesson = fallback_lesson(language, level)
            self._by_key[(language, level)] = lesson
        return lesson

    @classmethod
    def from_dir(cls, directory: str | Path) -> "LessonLibrary":
        library = cls()
        for path in sorted(Path(directory).glob("*.json")):
            library.add(load_lesson(path))
        return library

    @classmethod
    def bundled(cls) -> "LessonLibrary":
        from importlib import resources

        library = cls()
        root = resources.files("lingobank") / "data" / "lessons"
        for entry in sorted(root.iterdir(), key=lambda e: e.name):
            if entry.name.endswith(".json"):
                library.add(parse_lesson(json.loads(entry.read_text(encoding="utf-8"))))
        return library
