"""Hardware target registry: device identities and one-hot device encodings."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np


@dataclass(frozen=True)
class DeviceId:
    name: str
    index: int


class DeviceRegistry:
    """Ordered set of device names; indices are dense 0..n-1."""

    def __init__(self, names: Sequence[str]):
        names = tuple(str(n) for n in names)
        if not names:
            raise ValueError("registry needs at least one device")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate device names: {names}")
        self._devices = tuple(DeviceId(name, i) for i, name in enumerate(names))
        self._by_name = {d.name: d for d in self._devices}

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self._devices)

    def device(self, name: str) -> DeviceId:
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"unknown device {name!r}; registry has {list(self.names)}") from None

    def __contains__(self, dev: DeviceId) -> bool:
        return self._by_name.get(dev.name) == dev

    def __len__(self) -> int:
        return len(self._devices)

    def __iter__(self) -> Iterator[DeviceId]:
        return iter(self._devices)

    def __eq__(self, other) -> bool:
        return isinstance(other, DeviceRegistry) and self.names == other.names

    def __repr__(self) -> str:
        return f"DeviceRegistry({list(self.names)})"

    def one_hot(self, dev: DeviceId) -> np.ndarray:
        if dev not in self:
            raise KeyError(f"device {dev.name!r} is not in this registry")
        vec = np.zeros(len(self))
        vec[dev.index] = 1.0
        return vec


def save_registry(registry: DeviceRegistry, path: str | Path) -> None:
    Path(path).write_text(json.dumps(list(registry.names)) + "\n", encoding="utf-8")


def load_registry(path: str | Path) -> DeviceRegistry:
    names = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(names, list):
        raise ValueError(f"{path}: registry must be a JSON array of device names")
    return DeviceRegistry(names)
