"""Input events injected into a session by the agent or the human viewer."""

from __future__ import annotations

import enum
from dataclasses import dataclass


class InputKind(str, enum.Enum):
    MOUSE_MOVE = "mouse_move"
    MOUSE_CLICK = "mouse_click"
    KEY_PRESS = "key_press"
    TEXT = "text"


class InputSource(str, enum.Enum):
    AGENT = "agent"
    HUMAN = "human"


@dataclass(frozen=True)
class InputEvent:
    kind: InputKind
    source: InputSource
    client_timestamp_ms: float
    x: int = 0
    y: int = 0
    key: str = ""
    text: str = ""

    def is_mouse(self) -> bool:
        return self.kind in (InputKind.MOUSE_MOVE, InputKind.MOUSE_CLICK)

    def to_json_obj(self) -> dict:
        return {
            "kind": self.kind.value,
            "source": self.source.value,
            "t": self.client_timestamp_ms,
            "x": self.x,
            "y": self.y,
            "key": self.key,
            "text": self.text,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "InputEvent":
        return cls(
            kind=InputKind(obj["kind"]),
            source=InputSource(obj["source"]),
            client_timestamp_ms=float(obj.get("t", 0.0)),
            x=int(obj.get("x", 0)),
            y=int(obj.get("y", 0)),
            key=str(obj.get("key", "")),
            text=str(obj.get("text", "")),
        )
