"""Role model and sensitive-species location coarsening."""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

from .errors import ConfigError

ADMIN = "admin"
RESEARCHER = "researcher"
PUBLIC = "public"
ROLES = (ADMIN, RESEARCHER, PUBLIC)


@dataclass(frozen=True)
class SensitivePolicy:
    """Coarsen coordinates of one species for roles without raw access."""

    species: str
    grid_degrees: float = 0.1
    raw_access_roles: frozenset[str] = frozenset({ADMIN, RESEARCHER})

    def __post_init__(self):
        if self.grid_degrees <= 0:
            raise ConfigError(f"grid_degrees must be > 0, got {self.grid_degrees}")
        unknown = set(self.raw_access_roles) - set(ROLES)
        if unknown:
            raise ConfigError(f"unknown roles in policy: {sorted(unknown)}")

    def allows_raw(self, role: str) -> bool:
        return role in self.raw_access_roles


def _snap(value: float, grid: float) -> float:
    # Decimal keeps ties like -12.5 exact; binary floats would misround them.
    grid_d = Decimal(str(grid))
    steps = (Decimal(str(value)) / grid_d).quantize(Decimal(1), rounding=ROUND_HALF_UP)
    return float(steps * grid_d)


def obfuscate_location(lat: float, lon: float, policy: SensitivePolicy) -> tuple[float, float]:
    """Snap both coordinates to the policy grid, ties rounded away from zero.

    Idempotent: snapping an already-snapped coordinate returns it unchanged.
    """
    return _snap(lat, policy.grid_degrees), _snap(lon, policy.grid_degrees)


@dataclass(frozen=True)
class PolicyTable:
    """Per-species sensitive policies with a shared lookup."""

    policies: dict[str, SensitivePolicy] = field(default_factory=dict)

    @classmethod
    def from_list(cls, items: list[SensitivePolicy]) -> "PolicyTable":
        return cls(policies={p.species: p for p in items})

    def for_species(self, species: str) -> SensitivePolicy | None:
        return self.policies.get(species)

    def visible_location(
        self, species: str, lat: float, lon: float, role: str
    ) -> tuple[float, float]:
        """The most precise location the role may see for this species."""
        policy = self.for_species(species)
        if policy is None or policy.allows_raw(role):
            return lat, lon
        return obfuscate_location(lat, lon, policy)
