"""Controller modes, parameter vectors and named presets."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

MODES = ("stop", "contact", "compliant")

# Shield constants (meters, seconds, newtons).
LINK_RADIUS = 0.10
BODY_RADIUS = 0.3
HUMAN_SPEED = 2.0
DT = 0.01
F_MAX = 50.0


@dataclass(frozen=True)
class ControllerParams:
    v_max: float
    a_max: float
    j_max: float
    stiffness: float
    damping: float
    v_contact_max: float
    preset: str = "custom"

    def __post_init__(self):
        for k in ("v_max", "a_max", "j_max", "stiffness", "damping", "v_contact_max"):
            v = getattr(self, k)
            if not v > 0:
                raise ValueError(f"{k} must be positive, got {v!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    def with_(self, **kw) -> ControllerParams:
        return replace(self, preset="custom", **kw)


def _preset(name, v, a, stiffness, damping, vc):
    return ControllerParams(v, a, 10.0 * a, stiffness, damping, vc, name)


PRESETS = {
    p.preset: p
    for p in (
        _preset("coexistence", 0.5, 2.0, 800.0, 60.0, 0.15),
        _preset("critical", 0.1, 0.5, 200.0, 30.0, 0.05),
        _preset("beginner", 0.25, 1.0, 400.0, 40.0, 0.15),
        _preset("intermediate", 0.5, 2.0, 800.0, 60.0, 0.15),
        _preset("expert", 1.0, 4.0, 1200.0, 80.0, 0.15),
    )
}


def preset(name: str) -> ControllerParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None


@dataclass(frozen=True)
class Control:
    """Controller assignment for one skill: a mode plus a named parameter preset."""

    mode: str = "stop"
    preset: str = "coexistence"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown controller mode {self.mode!r}")
        preset(self.preset)

    @property
    def params(self) -> ControllerParams:
        return preset(self.preset)

    def __str__(self):
        return f"{self.mode} {self.preset}"

    @classmethod
    def parse(cls, line: str) -> Control:
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"expected '<mode> <preset>', got {line!r}")
        return cls(*parts)
