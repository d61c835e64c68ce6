from .framebuffer import VirtualFramebuffer
from .events import InputEvent, InputKind, InputSource
from .policy import EgressPolicy, egress_check
from .vfs import VirtualFs
from .scenes import SCENE_CATALOG, SceneScript, load_scene, step_frame

__all__ = [
    "EgressPolicy",
    "InputEvent",
    "InputKind",
    "InputSource",
    "SCENE_CATALOG",
    "SceneScript",
    "VirtualFramebuffer",
    "VirtualFs",
    "egress_check",
    "load_scene",
    "step_frame",
]
