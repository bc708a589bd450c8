"""Name-to-factory registry of segmentation models usable from configs."""

from __future__ import annotations

from typing import Callable

from ..core import SegmentationModel
from ..toymodels import ConflictPairModel, GlobalMixModel, LocalPixelModel

ModelFactory = Callable[[int], SegmentationModel]

_REGISTRY: dict[str, ModelFactory] = {
    "toy-local": lambda num_classes: LocalPixelModel(num_classes=num_classes),
    "toy-global": lambda num_classes: GlobalMixModel(num_classes=num_classes),
    "toy-conflict": lambda num_classes: ConflictPairModel(),
}


def register_model(name: str, factory: ModelFactory, replace: bool = False) -> None:
    """Make ``factory(num_classes) -> model`` available under ``name``."""
    if name in _REGISTRY and not replace:
        raise ValueError(f"model {name!r} is already registered")
    _REGISTRY[name] = factory


def registered_models() -> list[str]:
    return sorted(_REGISTRY)


def build_model(name: str, num_classes: int) -> SegmentationModel:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; registered: {', '.join(registered_models())}") from None
    model = factory(num_classes)
    model.name = name
    return model
